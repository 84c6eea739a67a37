#include "geophoto/stats.hpp"

#include "geophoto/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include <nlohmann/json.hpp>

namespace geophoto::stats {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

} // namespace

double normal_pdf(double z) { return std::exp(log_normal_pdf(z)); }

double normal_log_survival(double z)
{
    if (z < 30.0) {
        return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    }
    const double r = 1.0 / (z * z);
    const double series = 1.0 - r + 3.0 * r * r - 15.0 * r * r * r + 105.0 * r * r * r * r;
    return log_normal_pdf(z) - std::log(z) + std::log(series);
}

double normal_mills(double z)
{
    if (z < 30.0) {
        return normal_pdf(z) / (0.5 * std::erfc(z / std::numbers::sqrt2));
    }
    const double r = 1.0 / (z * z);
    return z / (1.0 - r + 3.0 * r * r - 15.0 * r * r * r + 105.0 * r * r * r * r);
}

double FitResult::param(std::string_view name) const
{
    for (const auto& [k, v] : params) {
        if (k == name) {
            return v;
        }
    }
    throw std::out_of_range("fit '" + model + "' has no parameter '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const FitResult& f)
{
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : f.params) {
        params[k] = v;
    }
    j = nlohmann::json{{"model", f.model},
                       {"params", params},
                       {f.goodness_kind == Goodness::r_squared ? "r_squared" : "log_likelihood", f.goodness},
                       {"n_points", f.n_points},
                       {"converged", f.converged},
                       {"iterations", f.diagnostics.iterations},
                       {"gradient_norm", f.diagnostics.gradient_norm}};
    if (!f.diagnostics.note.empty()) {
        j["note"] = f.diagnostics.note;
    }
}

// ---------------------------------------------------------------------------
// Two-parameter damped Newton ascent shared by both log-normal estimators.

namespace {

struct Eval2 {
    double ll{0.0};
    std::array<double, 2> g{};
    std::array<std::array<double, 2>, 2> h{};
};

struct NewtonOutcome {
    std::array<double, 2> p{};
    bool converged{false};
    int iterations{0};
    double gradient_norm{0.0};
    double last_step{0.0};
};

double inf_norm(const std::array<double, 2>& g) { return std::max(std::abs(g[0]), std::abs(g[1])); }

NewtonOutcome newton_maximize(const std::function<double(const std::array<double, 2>&)>& loglik,
                              const std::function<Eval2(const std::array<double, 2>&)>& full,
                              std::array<double, 2> p, int max_iterations)
{
    NewtonOutcome out;
    for (int it = 0; it < max_iterations; ++it) {
        const Eval2 e = full(p);
        out.iterations = it;
        out.gradient_norm = inf_norm(e.g);
        if (!std::isfinite(e.ll) || !std::isfinite(out.gradient_norm)) {
            break;
        }
        if (out.gradient_norm < kGradientTolerance) {
            out.converged = true;
            break;
        }
        std::array<double, 2> d{};
        const double det = e.h[0][0] * e.h[1][1] - e.h[0][1] * e.h[1][0];
        if (e.h[0][0] < 0.0 && det > 0.0) {
            d[0] = -(e.h[1][1] * e.g[0] - e.h[0][1] * e.g[1]) / det;
            d[1] = -(-e.h[1][0] * e.g[0] + e.h[0][0] * e.g[1]) / det;
        } else {
            const double scale = std::abs(e.h[0][0]) + std::abs(e.h[1][1]) + 1.0;
            d = {e.g[0] / scale, e.g[1] / scale};
        }
        const double len = inf_norm(d);
        if (len > 1.0) {
            d = {d[0] / len, d[1] / len};
        }
        const double slack = 1e-12 * (1.0 + std::abs(e.ll));
        double t = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            const std::array<double, 2> q{p[0] + t * d[0], p[1] + t * d[1]};
            const double ll = loglik(q);
            if (std::isfinite(ll) && ll >= e.ll - slack) {
                p = q;
                moved = true;
                break;
            }
        }
        out.last_step = moved ? t * inf_norm(d) : 0.0;
        if (!moved) {
            break;
        }
    }
    if (!out.converged) {
        const Eval2 e = full(p);
        out.gradient_norm = inf_norm(e.g);
        out.converged = out.gradient_norm < kGradientTolerance;
    }
    out.p = p;
    return out;
}

// Sufficient statistics of y = ln x for the continuous model.
struct LogSample {
    double n{0.0};
    double mean{0.0};
    double centered_ss{0.0};
    double sum{0.0};
    double t{0.0}; // ln(truncation point)
};

LogSample summarize(std::span<const double> samples, double truncation_point)
{
    LogSample s;
    s.n = static_cast<double>(samples.size());
    long double sum = 0.0L;
    for (double x : samples) {
        sum += std::log(x);
    }
    s.sum = static_cast<double>(sum);
    s.mean = static_cast<double>(sum / samples.size());
    long double ss = 0.0L;
    for (double x : samples) {
        const long double d = std::log(x) - static_cast<long double>(s.mean);
        ss += d * d;
    }
    s.centered_ss = static_cast<double>(ss);
    s.t = truncation_point > 0.0 ? std::log(truncation_point) : -HUGE_VAL;
    return s;
}

Eval2 continuous_eval(const LogSample& s, double mu, double log_sigma)
{
    const double sigma = std::exp(log_sigma);
    const double n = s.n;
    const double shift = (s.mean - mu) / sigma;
    const double sum_z = n * shift;
    const double sum_z2 = s.centered_ss / (sigma * sigma) + n * shift * shift;
    const double alpha = (s.t - mu) / sigma;
    double lambda = 0.0, dlambda = 0.0, log_q = 0.0, a_term = 0.0;
    if (std::isfinite(alpha)) {
        lambda = normal_mills(alpha);
        dlambda = lambda * (lambda - alpha);
        log_q = normal_log_survival(alpha);
        a_term = alpha;
    }
    Eval2 e;
    e.ll = -0.5 * sum_z2 - n * log_sigma - n * kLogSqrt2Pi - s.sum - n * log_q;
    e.g[0] = (sum_z - n * lambda) / sigma;
    e.g[1] = sum_z2 - n - n * lambda * a_term;
    e.h[0][0] = n * (dlambda - 1.0) / (sigma * sigma);
    e.h[0][1] = (-2.0 * sum_z + n * lambda + n * a_term * dlambda) / sigma;
    e.h[1][0] = e.h[0][1];
    e.h[1][1] = -2.0 * sum_z2 + n * a_term * (a_term * dlambda + lambda);
    return e;
}

// Root of d/dmu for fixed sigma; the score is strictly decreasing in mu.
double profile_mu(const LogSample& s, double log_sigma)
{
    const double sigma = std::exp(log_sigma);
    auto score = [&](double mu) { return (s.mean - mu) / sigma - normal_mills((s.t - mu) / sigma); };
    double hi = s.mean;
    double lo = s.mean - sigma;
    for (int k = 0; k < 80 && score(lo) <= 0.0; ++k) {
        lo = s.mean - sigma * std::ldexp(1.0, k + 1);
    }
    for (int k = 0; k < 200 && hi - lo > 1e-14 * (1.0 + std::abs(hi)); ++k) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

FitResult make_lognormal_result(std::string model, double mu, double log_sigma, double ll, std::size_t n,
                                const NewtonOutcome& o, std::string note)
{
    const double sigma = std::exp(log_sigma);
    FitResult r;
    r.model = std::move(model);
    r.params = {{"mu", mu}, {"sigma2", sigma * sigma}};
    r.goodness_kind = Goodness::log_likelihood;
    r.goodness = ll;
    r.n_points = n;
    r.converged = o.converged;
    r.diagnostics = {o.iterations, o.gradient_norm, o.last_step, std::move(note)};
    return r;
}

} // namespace

double truncated_lognormal_loglik(std::span<const double> samples, double truncation_point, double mu,
                                  double sigma)
{
    const LogSample s = summarize(samples, truncation_point);
    return continuous_eval(s, mu, std::log(sigma)).ll;
}

Gradient2 truncated_lognormal_gradient(std::span<const double> samples, double truncation_point, double mu,
                                       double sigma)
{
    const LogSample s = summarize(samples, truncation_point);
    const Eval2 e = continuous_eval(s, mu, std::log(sigma));
    return {e.g[0], e.g[1]};
}

FitResult fit_truncated_lognormal(std::span<const double> samples, double truncation_point)
{
    if (samples.size() < kMinLognormalSamples) {
        throw InsufficientDataError("truncated log-normal fit needs at least 30 samples, got "
                                    + std::to_string(samples.size()));
    }
    if (!(truncation_point >= 0.0)) {
        throw DataError("truncation point must be non-negative");
    }
    for (double x : samples) {
        if (!(x > 0.0) || x < truncation_point || !std::isfinite(x)) {
            throw DataError("sample " + std::to_string(x) + " below truncation point "
                            + std::to_string(truncation_point));
        }
    }
    const LogSample s = summarize(samples, truncation_point);
    if (!(s.centered_ss > 0.0)) {
        throw DegenerateDataError("all samples are equal (zero variance)");
    }
    const double start_log_sigma = 0.5 * std::log(s.centered_ss / s.n);

    if (truncation_point == 0.0) {
        NewtonOutcome closed;
        closed.converged = true;
        const double ll = continuous_eval(s, s.mean, start_log_sigma).ll;
        return make_lognormal_result("truncated_lognormal", s.mean, start_log_sigma, ll, samples.size(), closed,
                                     "untruncated closed form");
    }

    auto loglik = [&](const std::array<double, 2>& p) { return continuous_eval(s, p[0], p[1]).ll; };
    auto full = [&](const std::array<double, 2>& p) { return continuous_eval(s, p[0], p[1]); };

    NewtonOutcome o = newton_maximize(loglik, full, {s.mean, start_log_sigma}, kMaxNewtonIterations);
    std::string note;
    if (!o.converged) {
        // Profile likelihood in ln(sigma): bisection on its derivative.
        auto dprofile = [&](double ls) { return continuous_eval(s, profile_mu(s, ls), ls).g[1]; };
        double lo = start_log_sigma - 8.0;
        double hi = start_log_sigma + 4.0;
        if (dprofile(lo) > 0.0 && dprofile(hi) < 0.0) {
            for (int k = 0; k < 50; ++k) {
                const double mid = 0.5 * (lo + hi);
                (dprofile(mid) > 0.0 ? lo : hi) = mid;
            }
            const double ls = 0.5 * (lo + hi);
            const NewtonOutcome polished =
                newton_maximize(loglik, full, {profile_mu(s, ls), ls}, kMaxNewtonIterations);
            o = polished;
            note = "profile-likelihood fallback";
        }
    }
    if (!o.converged) {
        throw ConvergenceError("truncated log-normal fit did not converge; final gradient norm "
                               + std::to_string(o.gradient_norm));
    }
    return make_lognormal_result("truncated_lognormal", o.p[0], o.p[1], loglik(o.p), samples.size(), o,
                                 std::move(note));
}

// ---------------------------------------------------------------------------
// Binned (interval-censored) variant.

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kGlNodes{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                           0.2369268850561891, 0.2369268850561891};

// ln(Phi(b) - Phi(a)) for a < b, accurate in both tails and for narrow intervals.
double log_interval_probability(double a, double b)
{
    if (b - a < 0.5) {
        const double r = a >= 0.0 ? a : (b <= 0.0 ? b : 0.0);
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double acc = 0.0;
        for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
            const double x = mid + half * kGlNodes[i];
            acc += kGlWeights[i] * std::exp(-0.5 * (x * x - r * r));
        }
        return log_normal_pdf(r) + std::log(half * acc);
    }
    if (a >= 0.0) {
        const double la = normal_log_survival(a);
        return la + std::log(-std::expm1(normal_log_survival(b) - la));
    }
    if (b <= 0.0) {
        const double lb = normal_log_survival(-b);
        return lb + std::log(-std::expm1(normal_log_survival(-a) - lb));
    }
    return std::log1p(-(std::exp(normal_log_survival(b)) + std::exp(normal_log_survival(-a))));
}

struct BinnedSample {
    std::vector<double> log_lo;
    std::vector<double> log_hi;
    std::vector<double> weight;
    double n{0.0};
};

struct BinnedValue {
    double ll{0.0};
    std::array<double, 2> g{};
};

BinnedValue binned_value(const BinnedSample& s, double mu, double log_sigma)
{
    const double sigma = std::exp(log_sigma);
    BinnedValue v;
    long double ll = 0.0L, g0 = 0.0L, g1 = 0.0L;
    for (std::size_t k = 0; k < s.weight.size(); ++k) {
        const double a = (s.log_lo[k] - mu) / sigma;
        const double b = (s.log_hi[k] - mu) / sigma;
        const double lp = log_interval_probability(a, b);
        const double ra = std::exp(log_normal_pdf(a) - lp);
        const double e = std::expm1(-0.5 * (b - a) * (b + a));
        const double w = s.weight[k];
        ll += w * lp;
        g0 += w * (-ra * e) / sigma;       // (phi(a) - phi(b)) / (sigma P)
        g1 += w * ra * ((a - b) - b * e);  // (a phi(a) - b phi(b)) / P
    }
    const double alpha = -mu / sigma; // truncation at 1 => ln 1 = 0
    const double lambda = normal_mills(alpha);
    v.ll = static_cast<double>(ll) - s.n * normal_log_survival(alpha);
    v.g[0] = static_cast<double>(g0) - s.n * lambda / sigma;
    v.g[1] = static_cast<double>(g1) - s.n * lambda * alpha;
    return v;
}

Eval2 binned_eval(const BinnedSample& s, double mu, double log_sigma)
{
    const BinnedValue c = binned_value(s, mu, log_sigma);
    Eval2 e;
    e.ll = c.ll;
    e.g = c.g;
    constexpr double h = 1e-5;
    const BinnedValue mp = binned_value(s, mu + h, log_sigma);
    const BinnedValue mm = binned_value(s, mu - h, log_sigma);
    const BinnedValue sp = binned_value(s, mu, log_sigma + h);
    const BinnedValue sm = binned_value(s, mu, log_sigma - h);
    e.h[0][0] = (mp.g[0] - mm.g[0]) / (2 * h);
    e.h[1][1] = (sp.g[1] - sm.g[1]) / (2 * h);
    e.h[0][1] = e.h[1][0] = 0.5 * ((mp.g[1] - mm.g[1]) + (sp.g[0] - sm.g[0])) / (2 * h);
    return e;
}

} // namespace

FitResult fit_truncated_lognormal_binned(std::span<const std::int64_t> counts)
{
    if (counts.size() < kMinLognormalSamples) {
        throw InsufficientDataError("truncated log-normal fit needs at least 30 samples, got "
                                    + std::to_string(counts.size()));
    }
    std::map<std::int64_t, double> hist;
    for (auto k : counts) {
        if (k < 1) {
            throw DataError("count " + std::to_string(k) + " below truncation point 1");
        }
        hist[k] += 1.0;
    }
    if (hist.size() < 2) {
        throw DegenerateDataError("all counts are equal (zero variance)");
    }
    BinnedSample s;
    s.n = static_cast<double>(counts.size());
    long double sum = 0.0L, sum2 = 0.0L;
    for (const auto& [k, w] : hist) {
        s.log_lo.push_back(std::log(static_cast<double>(k)));
        s.log_hi.push_back(std::log(static_cast<double>(k) + 1.0));
        s.weight.push_back(w);
        const double mid = std::log(static_cast<double>(k) + 0.5);
        sum += w * mid;
        sum2 += w * mid * mid;
    }
    const double mean = static_cast<double>(sum / s.n);
    const double var = std::max(1e-6, static_cast<double>(sum2 / s.n) - mean * mean);

    auto loglik = [&](const std::array<double, 2>& p) { return binned_value(s, p[0], p[1]).ll; };
    auto full = [&](const std::array<double, 2>& p) { return binned_eval(s, p[0], p[1]); };
    const NewtonOutcome o = newton_maximize(loglik, full, {mean, 0.5 * std::log(var)}, kMaxNewtonIterations);
    if (!o.converged) {
        throw ConvergenceError("binned truncated log-normal fit did not converge; final gradient norm "
                               + std::to_string(o.gradient_norm));
    }
    return make_lognormal_result("truncated_lognormal_binned", o.p[0], o.p[1], loglik(o.p), counts.size(), o, {});
}

// ---------------------------------------------------------------------------
// Closed-form least squares.

namespace {

struct Ols {
    double slope{0.0};
    double intercept{0.0};
    double r2{0.0};
};

Ols ols(std::span<const double> xs, std::span<const double> ys)
{
    const double n = static_cast<double>(xs.size());
    long double sx = 0.0L, sy = 0.0L;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double xbar = static_cast<double>(sx / n);
    const double ybar = static_cast<double>(sy / n);
    long double sxx = 0.0L, sxy = 0.0L, syy = 0.0L;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const long double dx = xs[i] - xbar;
        const long double dy = ys[i] - ybar;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0L)) {
        throw DegenerateDataError("zero variance in x");
    }
    Ols o;
    o.slope = static_cast<double>(sxy / sxx);
    o.intercept = ybar - o.slope * xbar;
    long double ssres = 0.0L;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const long double r = ys[i] - (o.intercept + o.slope * xs[i]);
        ssres += r * r;
    }
    o.r2 = syy > 0.0L ? static_cast<double>(1.0L - ssres / syy) : 1.0;
    return o;
}

void check_points(std::span<const double> xs, std::span<const double> ys, std::string_view what)
{
    if (xs.size() != ys.size()) {
        throw DataError(std::string(what) + ": xs and ys differ in length");
    }
    if (xs.size() < 3) {
        throw InsufficientDataError(std::string(what) + " needs at least 3 points, got " + std::to_string(xs.size()));
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
            throw DataError(std::string(what) + ": non-finite input");
        }
    }
}

void check_positive(std::span<const double> v, std::string_view what)
{
    for (double y : v) {
        if (!(y > 0.0)) {
            throw DataError(std::string(what) + ": non-positive value " + std::to_string(y));
        }
    }
}

} // namespace

FitResult fit_power_law(std::span<const double> xs, std::span<const double> ys)
{
    check_points(xs, ys, "power-law fit");
    check_positive(xs, "power-law fit x");
    check_positive(ys, "power-law fit y");
    std::vector<double> lx(xs.size()), ly(ys.size());
    std::transform(xs.begin(), xs.end(), lx.begin(), [](double v) { return std::log(v); });
    std::transform(ys.begin(), ys.end(), ly.begin(), [](double v) { return std::log(v); });
    const Ols o = ols(lx, ly);
    FitResult r;
    r.model = "power_law";
    r.params = {{"q", -o.slope}, {"c", std::exp(o.intercept)}};
    r.goodness = o.r2;
    r.n_points = xs.size();
    return r;
}

FitResult fit_exponential(std::span<const double> xs, std::span<const double> ys)
{
    check_points(xs, ys, "exponential fit");
    check_positive(ys, "exponential fit y");
    std::vector<double> ly(ys.size());
    std::transform(ys.begin(), ys.end(), ly.begin(), [](double v) { return std::log(v); });
    const Ols o = ols(xs, ly);
    FitResult r;
    r.model = "exponential";
    r.params = {{"A", std::exp(o.intercept)}, {"beta", -o.slope}};
    r.goodness = o.r2;
    r.n_points = xs.size();
    return r;
}

FitResult linear_regression_r2(std::span<const double> xs, std::span<const double> ys)
{
    check_points(xs, ys, "linear regression");
    const Ols o = ols(xs, ys);
    FitResult r;
    r.model = "linear";
    r.params = {{"slope", o.slope}, {"intercept", o.intercept}};
    r.goodness = o.r2;
    r.n_points = xs.size();
    return r;
}

} // namespace geophoto::stats
