#pragma once

#include <limits>
#include <optional>
#include <string>

namespace bmkit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Hölder conjugate s' = s/(s-1), with 1' = inf and inf' = 1.
double conjugate(double s);

/// Exponents (p, t, r, q, eta) of M_p^{t,r}(l^q) together with the
/// conjugates used by the predual block space H_{p'}^{t',r'}(l^{q'}).
/// r = kInf selects sup-aggregation.
class ExponentSet {
public:
    /// Accepts 1 <= p <= t < inf, 1 <= r <= inf, 1 < q < inf, eta > 0.
    /// Trivial regimes are representable (the triviality experiment needs them).
    static ExponentSet make(double p, double t, double r, double q, std::optional<double> eta = std::nullopt);

    double p() const { return p_; }
    double t() const { return t_; }
    double r() const { return r_; }
    double q() const { return q_; }
    std::optional<double> eta() const { return eta_; }

    double p_conj() const { return p_conj_; }
    double t_conj() const { return t_conj_; }
    double r_conj() const { return r_conj_; }
    double q_conj() const { return q_conj_; }

    bool r_infinite() const { return r_ == kInf; }

    /// M_p^{t,r} != {0} iff p < t < r < inf, or p <= t < r = inf.
    bool nontrivial() const;

    /// Throws ErrorCode::regime unless the block-space theory applies
    /// (nontrivial regime with p > 1).
    void require_block_regime() const;

    /// 0 < eta < min{p', q'}.
    bool eta_admissible(double eta) const;

    std::string describe() const;

private:
    double p_ = 2, t_ = 3, r_ = 4, q_ = 2;
    std::optional<double> eta_;
    double p_conj_ = 2, t_conj_ = 1.5, r_conj_ = 4.0 / 3.0, q_conj_ = 2;
};

/// Text of the nontriviality dichotomy, used in regime diagnostics.
inline constexpr const char* kDichotomy =
    "M_p^{t,r} is nontrivial iff p < t < r < inf or p <= t < r = inf";

}  // namespace bmkit
