#include "bmkit/exponents.hpp"

#include <cmath>
#include <sstream>

#include "bmkit/error.hpp"

namespace bmkit {

double conjugate(double s) {
    if (s == 1.0) return kInf;
    if (s == kInf) return 1.0;
    return s / (s - 1.0);
}

ExponentSet ExponentSet::make(double p, double t, double r, double q, std::optional<double> eta) {
    auto bad = [](const std::string& msg) { return Error(ErrorCode::domain, "invalid exponents: " + msg); };
    if (!std::isfinite(p) || p < 1.0) throw bad("p must be a finite real >= 1");
    if (!std::isfinite(t) || t < p) throw bad("t must be finite with t >= p");
    if (std::isnan(r) || r < 1.0) throw bad("r must satisfy 1 <= r <= inf");
    if (!std::isfinite(q) || q <= 1.0) throw bad("q must lie in (1, inf)");
    if (eta && (!std::isfinite(*eta) || *eta <= 0.0)) throw bad("eta must be a positive real");

    ExponentSet e;
    e.p_ = p;
    e.t_ = t;
    e.r_ = r;
    e.q_ = q;
    e.eta_ = eta;
    e.p_conj_ = conjugate(p);
    e.t_conj_ = conjugate(t);
    e.r_conj_ = conjugate(r);
    e.q_conj_ = conjugate(q);
    return e;
}

bool ExponentSet::nontrivial() const {
    if (r_ == kInf) return p_ <= t_;
    return p_ < t_ && t_ < r_;
}

void ExponentSet::require_block_regime() const {
    if (!nontrivial()) {
        throw Error(ErrorCode::regime, "exponents " + describe() + " are in the trivial regime (" + kDichotomy + ")");
    }
    if (p_ <= 1.0) {
        throw Error(ErrorCode::regime, "block spaces need p > 1 so that p' is finite (got " + describe() + ")");
    }
    if (r_ != kInf && !(t_ < r_)) {
        throw Error(ErrorCode::regime, std::string("block spaces need t < r (") + kDichotomy + ")");
    }
}

bool ExponentSet::eta_admissible(double eta) const {
    return eta > 0.0 && eta < std::min(p_conj_, q_conj_);
}

std::string ExponentSet::describe() const {
    std::ostringstream os;
    os << "(p=" << p_ << ", t=" << t_ << ", r=" << r_ << ", q=" << q_;
    if (eta_) os << ", eta=" << *eta_;
    os << ")";
    return os.str();
}

}  // namespace bmkit
