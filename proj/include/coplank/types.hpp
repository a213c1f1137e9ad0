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

#pragma once

#include <Eigen/Core>

#include <array>
#include <string_view>

namespace coplank {

inline constexpr int kStateDim = 7;
inline constexpr int kActionDim = 3;
inline constexpr int kInputDim = kStateDim + kActionDim;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using ActionVector = Eigen::Matrix<double, kActionDim, 1>;
using InputVector = Eigen::Matrix<double, kInputDim, 1>;

/// Index of each observation channel inside a StateVector.
enum StateIndex : int { kX = 0, kZ, kTheta, kDeltaD, kD, kDDot, kTau };

inline constexpr std::array<std::string_view, kStateDim> kStateNames = {
    "x", "z", "theta", "delta_d", "d", "d_dot", "tau"};
inline constexpr std::array<std::string_view, kActionDim> kActionNames = {
    "x_dot", "z_dot", "theta_dot"};
inline constexpr std::array<std::string_view, kInputDim> kInputNames = {
    "x", "z", "theta", "delta_d", "d", "d_dot", "tau", "x_dot", "z_dot", "theta_dot"};

/// Sensorimotor observation. Positions in metres, pitch in radians, ball
/// quantities in plank-scaled units, tau in simulator torque units.
struct State {
    double x = 0.0;
    double z = 0.0;
    double theta = 0.0;
    double delta_d = 0.0;
    double d = 0.0;
    double d_dot = 0.0;
    double tau = 0.0;

    StateVector vec() const;
    static State from_vec(const StateVector& v);

    /// Ball goal implied by d and delta_d.
    double goal() const { return d - delta_d; }

    bool operator==(const State&) const = default;
};

/// End-effector velocity command.
struct Action {
    double x_dot = 0.0;
    double z_dot = 0.0;
    double theta_dot = 0.0;

    ActionVector vec() const;
    static Action from_vec(const ActionVector& v);

    bool operator==(const Action&) const = default;
};

/// Symmetric half-ranges of the action box.
struct ActionBounds {
    ActionVector xi = ActionVector(0.1, 0.1, 0.2);

    void validate() const;
    /// Strict interior test.
    bool contains(const Action& a) const;
    /// Closed-box test, used for logged actions.
    bool contains_closed(const Action& a) const;
};

/// Next-state belief with a diagonal covariance.
struct GaussianState {
    StateVector mean = StateVector::Zero();
    StateVector var = StateVector::Zero();

    static GaussianState point(const State& s);
    State mean_state() const { return State::from_vec(mean); }
};

struct Transition {
    State s;
    Action a;
    State s_next;
};

/// Diagonal quadratic cost around a target state.
struct CostSpec {
    StateVector weights = StateVector::Zero();
    StateVector target = StateVector::Zero();

    void validate() const;

    /// Ball error 1.0, ball velocity 0.2.
    static CostSpec position_only();
    /// position_only plus interaction force 0.01.
    static CostSpec with_force();
};

InputVector make_input(const State& s, const Action& a);

/// Immediate cost c(s) = sum_i w_i (s_i - s*_i)^2.
double cost(const State& s, const CostSpec& spec);

/// Clamp a predicted state onto the physically meaningful domain:
/// d in [0,1], tau >= 0, |theta| <= theta_limit, delta_d re-derived from goal.
State project_state(const State& s, double goal, double theta_limit = 0.5);

} // namespace coplank
