#include "tailq/model.hpp"

#include <cstdio>

#include "tailq/errors.hpp"

namespace tailq {

DerivedConstants derive_constants(const ModelParams& params) {
    validate(params.arrival);
    validate(params.service);
    if (!(params.feedback_p >= 0.0 && params.feedback_p < 1.0))
        throw DomainError("feedback_p must lie in [0,1)");

    DerivedConstants c;
    c.a = mean(params.arrival);
    c.b = mean(params.service);
    c.lambda = 1.0 / c.a;
    c.p = params.feedback_p;
    c.q = 1.0 - c.p;
    c.r = c.p + c.lambda * c.b;
    c.rho = c.lambda * c.b / c.q;
    c.b_h = c.b / c.q;
    c.stable = c.r < 1.0;
    c.m_inf = c.stable ? c.lambda * c.b / (1.0 - c.r) : 0.0;
    return c;
}

void require_stable(const DerivedConstants& c) {
    if (!c.stable) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "queue is unstable: rho(with feedback) = %.6g >= 1",
                      c.rho);
        throw InstabilityError(c.rho, buf);
    }
}

}  // namespace tailq
