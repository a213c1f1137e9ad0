/*
 * Copyright 2026 The coplank Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "coplank/types.hpp"

#include "coplank/errors.hpp"

#include <algorithm>
#include <cmath>

namespace coplank {

StateVector State::vec() const
{
    StateVector v;
    v << x, z, theta, delta_d, d, d_dot, tau;
    return v;
}

State State::from_vec(const StateVector& v)
{
    return State{v[kX], v[kZ], v[kTheta], v[kDeltaD], v[kD], v[kDDot], v[kTau]};
}

ActionVector Action::vec() const { return ActionVector(x_dot, z_dot, theta_dot); }

Action Action::from_vec(const ActionVector& v) { return Action{v[0], v[1], v[2]}; }

void ActionBounds::validate() const
{
    for (int j = 0; j < kActionDim; ++j) {
        if (!(xi[j] > 0.0) || !std::isfinite(xi[j]))
            throw ContractViolation("action bounds must be positive and finite");
    }
}

bool ActionBounds::contains(const Action& a) const
{
    const ActionVector v = a.vec();
    for (int j = 0; j < kActionDim; ++j) {
        if (!(std::abs(v[j]) < xi[j])) return false;
    }
    return true;
}

bool ActionBounds::contains_closed(const Action& a) const
{
    const ActionVector v = a.vec();
    for (int j = 0; j < kActionDim; ++j) {
        if (!(std::abs(v[j]) <= xi[j])) return false;
    }
    return true;
}

GaussianState GaussianState::point(const State& s)
{
    return GaussianState{s.vec(), StateVector::Zero()};
}

void CostSpec::validate() const
{
    for (int i = 0; i < kStateDim; ++i) {
        if (!(weights[i] >= 0.0)) throw ContractViolation("cost weights must be non-negative");
    }
}

CostSpec CostSpec::position_only()
{
    CostSpec c;
    c.weights[kDeltaD] = 1.0;
    c.weights[kDDot] = 0.2;
    return c;
}

CostSpec CostSpec::with_force()
{
    CostSpec c = position_only();
    c.weights[kTau] = 0.01;
    return c;
}

InputVector make_input(const State& s, const Action& a)
{
    InputVector x;
    x << s.vec(), a.vec();
    return x;
}

double cost(const State& s, const CostSpec& spec)
{
    const StateVector e = s.vec() - spec.target;
    return (spec.weights.array() * e.array().square()).sum();
}

State project_state(const State& s, double goal, double theta_limit)
{
    State out = s;
    out.d = std::clamp(s.d, 0.0, 1.0);
    out.delta_d = out.d - goal;
    out.tau = std::max(0.0, s.tau);
    out.theta = std::clamp(s.theta, -theta_limit, theta_limit);
    return out;
}

} // namespace coplank
