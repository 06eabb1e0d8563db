#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace potlab {

// All recoverable failures derive from Error so the CLI can map them to exit code 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct GridError : Error { using Error::Error; };          // EmptyInterior, Disconnected, bad shape
struct GridMismatch : Error { using Error::Error; };       // fields from different grids combined
struct InvalidPotential : Error { using Error::Error; };   // box or mass constraint violated
struct MassOutOfRange : Error { using Error::Error; };     // requested mass outside (0, |Omega|)
struct ZeroField : Error { using Error::Error; };
struct NoConvergence : Error {
    double best_residual = 0.0;
    NoConvergence(const std::string& what, double r) : Error(what), best_residual(r) {}
};
struct Degenerate : Error { using Error::Error; };         // eigenvalue gap below resolution
struct DegenerateDistance : Error { using Error::Error; }; // ratio against zero distance
struct EmptyRegistry : Error { using Error::Error; };
struct ShellInfeasible : Error { using Error::Error; };
struct DeformationEscapes : Error { using Error::Error; };
struct LinearSolveFailure : Error { using Error::Error; };

// Neumaier compensated sum: summation-order noise would otherwise dominate the
// 1e-12 mass and distance audits on fine grids.
class CompensatedSum {
public:
    void add(double x) {
        double t = s_ + x;
        if (std::abs(s_) >= std::abs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double compensated_sum(const std::vector<double>& v) {
    CompensatedSum acc;
    for (double x : v) acc.add(x);
    return acc.value();
}

} // namespace potlab
