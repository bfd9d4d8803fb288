#pragma once

#include "tailq/distribution.hpp"

namespace tailq {

// Single-server FIFO queue with renewal input and Bernoulli feedback: a served
// customer rejoins the back of the queue with probability feedback_p, so its
// total number of service passes is geometric with mean 1/(1-feedback_p).
struct ModelParams {
    DistributionSpec arrival;  // inter-arrival law
    DistributionSpec service;  // per-pass service law
    double feedback_p = 0.0;
};

struct DerivedConstants {
    double a = 0;       // mean inter-arrival time
    double b = 0;       // mean service time per pass
    double lambda = 0;  // arrival rate 1/a
    double p = 0;       // feedback probability
    double q = 0;       // 1 - p
    double r = 0;       // p + lambda*b; the branching ratio of the backlog
    double rho = 0;     // lambda*b/q, offered load counting feedback passes
    double b_h = 0;     // b/q, mean total service a customer receives
    double m_inf = 0;   // lambda*b/(1-r), limit of the fluid multipliers
    bool stable = false;  // r < 1, equivalently rho < 1
};

// Validates both laws and feedback_p, then fills the table above.
DerivedConstants derive_constants(const ModelParams& params);

// Throws InstabilityError carrying rho when the queue has no steady state.
void require_stable(const DerivedConstants& c);

}  // namespace tailq
