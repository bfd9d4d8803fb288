#include "tailq/distribution.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include "tailq/errors.hpp"

namespace tailq {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Integral of f over (a, inf), relative tolerance 1e-10.
template <class F>
double integrate_to_inf(F f, double a) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    return GK::integrate(f, a, kInf, 15, 1e-10);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Pareto

double Pareto::mean() const { return shape * scale / (shape - 1.0); }

double Pareto::tail(double x) const {
    if (x <= scale) return 1.0;
    return std::pow(scale / x, shape);
}

double Pareto::integrated_tail(double x) const {
    if (x >= scale) {
        return clamp01(std::pow(scale, shape) * std::pow(x, 1.0 - shape) / (shape - 1.0));
    }
    return clamp01((scale - x) + scale / (shape - 1.0));
}

double Pareto::inverse_survival(double u) const { return scale * std::pow(u, -1.0 / shape); }

// ---------------------------------------------------------------------------
// ParetoLog

double ParetoLog::tail(double x) const {
    if (x <= scale) return 1.0;
    // ln(e*x/scale) = 1 + ln(x/scale)
    const double lg = 1.0 + std::log(x / scale);
    return clamp01(std::pow(scale / x, shape) * std::pow(lg, log_power));
}

double ParetoLog::mean() const {
    return scale + integrate_to_inf([this](double y) { return tail(y); }, scale);
}

double ParetoLog::integrated_tail(double x) const {
    if (x >= scale) {
        return clamp01(integrate_to_inf([this](double y) { return tail(y); }, x));
    }
    return clamp01((scale - x) + integrated_tail(scale));
}

double ParetoLog::inverse_survival(double u) const {
    if (u >= 1.0) return scale;
    // tail is strictly decreasing past the endpoint; bracket then bisect on the
    // log of the survival function, which is close to linear in log x.
    double lo = scale;
    double hi = scale * 2.0;
    while (tail(hi) > u) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);  // geometric midpoint
        (tail(mid) > u ? lo : hi) = mid;
        if (hi - lo <= 1e-14 * hi) break;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Exponential

double Exponential::tail(double x) const {
    if (x <= 0.0) return 1.0;
    return std::exp(-rate * x);
}

double Exponential::integrated_tail(double x) const {
    if (x >= 0.0) return clamp01(std::exp(-rate * x) / rate);
    return clamp01(-x + 1.0 / rate);
}

double Exponential::inverse_survival(double u) const { return -std::log(u) / rate; }

// ---------------------------------------------------------------------------
// Deterministic

double Deterministic::integrated_tail(double x) const {
    if (x >= value) return 0.0;
    return clamp01(value - x);
}

// ---------------------------------------------------------------------------
// Weibull

double Weibull::mean() const { return scale * std::tgamma(1.0 + 1.0 / shape); }

double Weibull::tail(double x) const {
    if (x <= 0.0) return 1.0;
    return std::exp(-std::pow(x / scale, shape));
}

double Weibull::integrated_tail(double x) const {
    const double from = std::max(x, 0.0);
    const double positive_part =
        integrate_to_inf([this](double y) { return tail(y); }, from);
    return clamp01(positive_part + (x < 0.0 ? -x : 0.0));
}

double Weibull::inverse_survival(double u) const {
    return scale * std::pow(-std::log(u), 1.0 / shape);
}

// ---------------------------------------------------------------------------
// Lognormal

double Lognormal::mean() const { return std::exp(mu + 0.5 * sigma * sigma); }

double Lognormal::tail(double x) const {
    if (x <= 0.0) return 1.0;
    return 0.5 * std::erfc((std::log(x) - mu) / (sigma * std::sqrt(2.0)));
}

double Lognormal::integrated_tail(double x) const {
    if (x <= 0.0) return clamp01(mean() - x);
    // E[(X - x)^+] in terms of the normal cdf.
    const double lx = std::log(x);
    const double d1 = (mu + sigma * sigma - lx) / sigma;
    const double d2 = (mu - lx) / sigma;
    return clamp01(mean() * normal_cdf(d1) - x * normal_cdf(d2));
}

double Lognormal::inverse_survival(double u) const {
    if (u >= 1.0) return 0.0;
    // P(Z > z) = u  =>  z = sqrt(2) * erfc_inv(2u)
    const double z = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
    return std::exp(mu + sigma * z);
}

// ---------------------------------------------------------------------------
// Variant-level dispatch

double mean(const DistributionSpec& d) {
    return std::visit([](const auto& v) { return v.mean(); }, d);
}

double tail(const DistributionSpec& d, double x) {
    return std::visit([x](const auto& v) { return v.tail(x); }, d);
}

double integrated_tail(const DistributionSpec& d, double x) {
    return std::visit([x](const auto& v) { return v.integrated_tail(x); }, d);
}

double inverse_survival(const DistributionSpec& d, double u) {
    return std::visit([u](const auto& v) { return v.inverse_survival(u); }, d);
}

double sample(const DistributionSpec& d, RandomStream& rs) {
    return inverse_survival(d, rs.next_unit());
}

double left_endpoint(const DistributionSpec& d) {
    return inverse_survival(d, 1.0);
}

std::optional<double> rv_alpha(const DistributionSpec& d) {
    if (const auto* p = std::get_if<Pareto>(&d)) return p->shape - 1.0;
    if (const auto* p = std::get_if<ParetoLog>(&d)) return p->shape - 1.0;
    return std::nullopt;
}

double sv_factor(const DistributionSpec& d, double x) {
    if (const auto* p = std::get_if<Pareto>(&d)) return std::pow(p->scale, p->shape);
    if (const auto* p = std::get_if<ParetoLog>(&d)) {
        const double lg = 1.0 + std::log(std::max(x, p->scale) / p->scale);
        return std::pow(p->scale, p->shape) * std::pow(lg, p->log_power);
    }
    throw RVRequired(std::string("no regular-variation index for ") + family_name(d) +
                     " distribution");
}

bool diagnostic_only(const DistributionSpec& d) {
    return std::holds_alternative<Weibull>(d) || std::holds_alternative<Lognormal>(d);
}

namespace {

void require(bool ok, const char* message) {
    if (!ok) throw DomainError(message);
}

struct Validator {
    void operator()(const Pareto& p) const {
        require(p.scale > 0.0, "pareto scale must be positive");
        require(p.shape > 1.0, "pareto shape must exceed 1 (finite mean)");
    }
    void operator()(const ParetoLog& p) const {
        require(p.scale > 0.0, "paretolog scale must be positive");
        require(p.shape > 1.0, "paretolog shape must exceed 1 (finite mean)");
        require(p.log_power >= 0.0, "paretolog log_power must be nonnegative");
        require(p.log_power <= p.shape,
                "paretolog log_power must not exceed shape (tail would rise above one)");
    }
    void operator()(const Exponential& e) const {
        require(e.rate > 0.0, "exp rate must be positive");
    }
    void operator()(const Deterministic& v) const {
        require(v.value > 0.0, "det value must be positive");
    }
    void operator()(const Weibull& w) const {
        require(w.scale > 0.0, "weibull scale must be positive");
        require(w.shape > 0.0 && w.shape < 1.0, "weibull shape must lie in (0,1)");
    }
    void operator()(const Lognormal& l) const {
        require(l.sigma > 0.0, "lognormal sigma must be positive");
    }
};

}  // namespace

void validate(const DistributionSpec& d) { std::visit(Validator{}, d); }

const char* family_name(const DistributionSpec& d) {
    struct Namer {
        const char* operator()(const Pareto&) const { return "pareto"; }
        const char* operator()(const ParetoLog&) const { return "paretolog"; }
        const char* operator()(const Exponential&) const { return "exp"; }
        const char* operator()(const Deterministic&) const { return "det"; }
        const char* operator()(const Weibull&) const { return "weibull"; }
        const char* operator()(const Lognormal&) const { return "lognormal"; }
    };
    return std::visit(Namer{}, d);
}

// ---------------------------------------------------------------------------
// Text form

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct Cursor {
    std::string_view s;
    size_t i = 0;

    void skip_ws() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool eat(char c) {
        skip_ws();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    std::string ident() {
        skip_ws();
        size_t start = i;
        while (i < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
            ++i;
        return to_lower(s.substr(start, i - start));
    }
    double number() {
        skip_ws();
        // from_chars wants a contiguous range with no leading whitespace
        const char* begin = s.data() + i;
        const char* end = s.data() + s.size();
        double value = 0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin)
            throw ParseError("expected a number in distribution text at position " +
                             std::to_string(i));
        i += static_cast<size_t>(ptr - begin);
        return value;
    }
    bool done() {
        skip_ws();
        return i == s.size();
    }
};

struct Arg {
    std::string key;  // empty if positional
    double value;
};

std::vector<Arg> parse_args(Cursor& c) {
    std::vector<Arg> args;
    if (!c.eat('(')) throw ParseError("expected '(' after distribution name");
    if (c.eat(')')) return args;
    for (;;) {
        Cursor probe = c;
        std::string key = probe.ident();
        Arg a;
        if (!key.empty() && probe.eat('=')) {
            c = probe;
            a.key = key;
            a.value = c.number();
        } else {
            a.value = c.number();
        }
        args.push_back(a);
        if (c.eat(')')) break;
        if (!c.eat(',')) throw ParseError("expected ',' or ')' in distribution arguments");
    }
    return args;
}

// Assign parsed args to the declared parameter slots; positional args fill in
// declaration order, named args may come in any order.
std::vector<double> bind_args(const std::string& family, const std::vector<Arg>& args,
                              const std::vector<std::string>& names) {
    std::vector<double> slot(names.size());
    std::vector<bool> set(names.size(), false);
    size_t next_positional = 0;
    for (const Arg& a : args) {
        size_t idx;
        if (a.key.empty()) {
            idx = next_positional++;
            if (idx >= names.size())
                throw ParseError(family + " takes " + std::to_string(names.size()) +
                                 " arguments");
        } else {
            auto it = std::find(names.begin(), names.end(), a.key);
            if (it == names.end())
                throw ParseError("unknown argument '" + a.key + "' for " + family);
            idx = static_cast<size_t>(it - names.begin());
            next_positional = std::max(next_positional, idx + 1);
        }
        if (set[idx]) throw ParseError("duplicate argument '" + names[idx] + "' for " + family);
        slot[idx] = a.value;
        set[idx] = true;
    }
    for (size_t k = 0; k < names.size(); ++k)
        if (!set[k]) throw ParseError(family + " is missing argument '" + names[k] + "'");
    return slot;
}

}  // namespace

DistributionSpec parse_distribution(std::string_view text) {
    Cursor c{text};
    const std::string family = c.ident();
    if (family.empty()) throw ParseError("empty distribution text");
    const std::vector<Arg> args = parse_args(c);
    if (!c.done()) throw ParseError("trailing characters after distribution text");

    DistributionSpec spec;
    if (family == "pareto") {
        auto v = bind_args(family, args, {"shape", "scale"});
        spec = Pareto{v[0], v[1]};
    } else if (family == "paretolog") {
        auto v = bind_args(family, args, {"shape", "scale", "log_power"});
        spec = ParetoLog{v[0], v[1], v[2]};
    } else if (family == "exp" || family == "exponential") {
        auto v = bind_args("exp", args, {"rate"});
        spec = Exponential{v[0]};
    } else if (family == "det" || family == "deterministic") {
        auto v = bind_args("det", args, {"value"});
        spec = Deterministic{v[0]};
    } else if (family == "weibull") {
        auto v = bind_args(family, args, {"shape", "scale"});
        spec = Weibull{v[0], v[1]};
    } else if (family == "lognormal") {
        auto v = bind_args(family, args, {"mu", "sigma"});
        spec = Lognormal{v[0], v[1]};
    } else {
        throw ParseError("unknown distribution family '" + family + "'");
    }
    validate(spec);
    return spec;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

std::string format_distribution(const DistributionSpec& d) {
    struct Formatter {
        std::string operator()(const Pareto& p) const {
            return "pareto(shape=" + num(p.shape) + ", scale=" + num(p.scale) + ")";
        }
        std::string operator()(const ParetoLog& p) const {
            return "paretolog(shape=" + num(p.shape) + ", scale=" + num(p.scale) +
                   ", log_power=" + num(p.log_power) + ")";
        }
        std::string operator()(const Exponential& e) const {
            return "exp(rate=" + num(e.rate) + ")";
        }
        std::string operator()(const Deterministic& v) const {
            return "det(" + num(v.value) + ")";
        }
        std::string operator()(const Weibull& w) const {
            return "weibull(shape=" + num(w.shape) + ", scale=" + num(w.scale) + ")";
        }
        std::string operator()(const Lognormal& l) const {
            return "lognormal(mu=" + num(l.mu) + ", sigma=" + num(l.sigma) + ")";
        }
    };
    return std::visit(Formatter{}, d);
}

}  // namespace tailq
