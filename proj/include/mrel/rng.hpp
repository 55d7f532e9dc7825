#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrel {

/// Deterministic RNG stream: a (seed, stream) pair fully determines the
/// sequence.  Distribution objects are constructed fresh per call so the
/// engine state is the only hidden state (needed for exact checkpoint resume).
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        eng_.seed(seq);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(eng_);
    }
    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(eng_);
    }
    std::int64_t poisson(double mean) {
        return std::poisson_distribution<std::int64_t>(mean)(eng_);
    }
    std::uint64_t integer(std::uint64_t n) {  // uniform on {0..n-1}
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
    }

    std::vector<double> dirichlet(std::span<const double> beta) {
        std::vector<double> x(beta.size());
        double sum = 0;
        for (std::size_t i = 0; i < beta.size(); ++i) {
            x[i] = gamma(beta[i], 1.0);
            sum += x[i];
        }
        if (sum <= 0) throw std::runtime_error("dirichlet: degenerate draw");
        for (double& v : x) v /= sum;
        return x;
    }

    /// Samples an index proportional to exp(logits), normalized internally.
    std::size_t categorical_from_logits(std::span<const double> logits) {
        double m = -std::numeric_limits<double>::infinity();
        for (double w : logits) m = std::max(m, w);
        if (!std::isfinite(m))
            throw std::runtime_error("categorical_from_logits: all weights are -inf");
        double total = 0;
        std::vector<double> p(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) {
            p[i] = std::exp(logits[i] - m);
            total += p[i];
        }
        double u = uniform() * total;
        double acc = 0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            acc += p[i];
            if (u < acc) return i;
        }
        return logits.size() - 1;
    }

    /// Samples an index proportional to nonnegative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0;
        for (double w : weights) total += w;
        if (!(total > 0)) throw std::runtime_error("categorical: zero total weight");
        double u = uniform() * total;
        double acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (!is) throw std::runtime_error("rng: malformed state string");
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

}  // namespace mrel
