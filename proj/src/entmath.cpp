#include "qnet/entmath.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qnet::entmath {

void require_werner_fidelity(double f, const char* what) {
    if (!(f >= 0.25 && f <= 1.0)) {
        throw std::domain_error(std::string(what) + ": fidelity " +
                                std::to_string(f) + " outside [0.25, 1]");
    }
}

PcsPrediction pcs_x_predict(double f) {
    require_werner_fidelity(f, "pcs_x_predict");
    const double c = (1.0 + 2.0 * f) * (1.0 + 2.0 * f) / 9.0;
    const double fp = 9.0 * f * f / ((1.0 + 2.0 * f) * (1.0 + 2.0 * f));
    return {c, fp};
}

PcsPrediction pcs_xz_predict(double f) {
    require_werner_fidelity(f, "pcs_xz_predict");
    const double r = std::sqrt(12.0 * f - 3.0);
    const double num_c = 3.0 + 6.0 * f - r + 4.0 * f * r;
    const double c = num_c * num_c / 324.0;
    const double den = (r - 1.0 - 8.0 * f) * (r - 1.0 - 8.0 * f);
    const double fp = (1.0 + 52.0 * f * f - r - 2.0 * f * (4.0 + r)) / den;
    return {c, fp};
}

double swap_fidelity(double f1, double f2) {
    require_werner_fidelity(f1, "swap_fidelity");
    require_werner_fidelity(f2, "swap_fidelity");
    return f1 * f2 + (1.0 - f1) * (1.0 - f2) / 3.0;
}

DistillResult distill_bbpssw(double f1, double f2) {
    require_werner_fidelity(f1, "distill_bbpssw");
    require_werner_fidelity(f2, "distill_bbpssw");
    const double e1 = (1.0 - f1) / 3.0;
    const double e2 = (1.0 - f2) / 3.0;
    const double p = f1 * f2 + f1 * e2 + e1 * f2 + 5.0 * e1 * e2;
    const double fp = (f1 * f2 + e1 * e2) / p;
    return {p, fp};
}

double werner_decohere(double f0, std::int64_t elapsed_ns, std::int64_t t_coh_ns) {
    if (t_coh_ns <= 0) {
        throw std::domain_error("werner_decohere: nonpositive coherence time");
    }
    if (elapsed_ns < 0) {
        throw std::domain_error("werner_decohere: negative elapsed time");
    }
    const double decay =
        std::exp(-static_cast<double>(elapsed_ns) / static_cast<double>(t_coh_ns));
    return kMixedFidelity + (f0 - kMixedFidelity) * decay;
}

namespace {

void require_car_params(const CarParams& p) {
    auto in01 = [](double x) { return x > 0.0 && x <= 1.0; };
    if (!in01(p.alpha_s) || !in01(p.alpha_i)) {
        throw std::domain_error("car_model: transmittance outside (0, 1]");
    }
    if (p.mu_c < 0 || p.mu_sn < 0 || p.mu_in < 0 || p.d_s < 0 || p.d_i < 0) {
        throw std::domain_error("car_model: negative rate parameter");
    }
}

}  // namespace

double car_model(const CarParams& p) {
    require_car_params(p);
    const double den_s = (p.mu_c + p.mu_sn) * p.alpha_s + p.d_s;
    const double den_i = (p.mu_c + p.mu_in) * p.alpha_i + p.d_i;
    if (den_s == 0.0 && den_i == 0.0) {
        throw std::domain_error("car_model: degenerate 0/0 input (no pairs, no dark counts)");
    }
    if (den_s == 0.0 || den_i == 0.0) {
        // One arm sees nothing at all; only possible when mu_c == 0 and that
        // arm's noise terms vanish, so the coincidence numerator is 0 too.
        throw std::domain_error("car_model: zero denominator factor");
    }
    return p.alpha_s * p.alpha_i * p.mu_c / (den_s * den_i) + 1.0;
}

PumpOptimum optimal_pump(const CarParams& fixed, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) {
        throw std::domain_error("optimal_pump: require 0 < lo < hi");
    }
    auto eval = [&fixed](double mu) {
        CarParams p = fixed;
        p.mu_c = mu;
        return car_model(p);
    };
    // Golden-section search; the objective is smooth and unimodal-or-monotone
    // on the physical parameter ranges.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = eval(c), fd = eval(d);
    int iterations = 0;
    // Relative tolerance 1e-6 on the bracketed maximizer.
    while ((b - a) > 0.5e-6 * (std::abs(c) + std::abs(d)) + 1e-300 &&
           ++iterations < 1000) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d);
        }
    }
    double mu_star = 0.5 * (a + b);
    double car_star = eval(mu_star);
    // Interior search can't beat an endpoint of a monotone objective; check the
    // original bounds explicitly.
    const double f_lo = eval(lo), f_hi = eval(hi);
    if (f_lo >= car_star) {
        mu_star = lo;
        car_star = f_lo;
    }
    if (f_hi > car_star) {
        mu_star = hi;
        car_star = f_hi;
    }
    const bool flat = (car_star - std::max(f_lo, f_hi)) < 1e-12;
    return {mu_star, car_star, flat};
}

double visibility(double n_max, double n_min) {
    if (n_max < 0 || n_min < 0 || n_min > n_max) {
        throw std::domain_error("visibility: require 0 <= n_min <= n_max");
    }
    if (n_max + n_min == 0.0) {
        throw std::domain_error("visibility: zero total counts");
    }
    return (n_max - n_min) / (n_max + n_min);
}

double coexistence_fidelity(double source_fidelity, double car) {
    require_werner_fidelity(source_fidelity, "coexistence_fidelity");
    if (!(car >= 1.0)) {
        throw std::domain_error("coexistence_fidelity: CAR below 1");
    }
    return ((car - 1.0) / car) * source_fidelity + kMixedFidelity / car;
}

}  // namespace qnet::entmath
