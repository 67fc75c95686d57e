#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace c2dyn {

using cplx = std::complex<double>;
using Vec2 = Eigen::Matrix<cplx, 2, 1>;
using Mat2 = Eigen::Matrix<cplx, 2, 2>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class ErrorCode {
    Config,
    NonRegularMap,
    OriginInput,
    NotEscaped,
    DegenerateChart,
    ResultantDegenerate,
    NearCriticalValue,
    StepUnderflow,
    ExceptionalStart,
    EmptySampleSet,
    DepthExceeded,
    BranchCrossing,
    CriticalInput,
    SectionPole,
    LoopNotClosed,
    Obstructed,
    InsufficientPairs,
    NumericalFailure,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::Config: return "Config";
    case ErrorCode::NonRegularMap: return "NonRegularMap";
    case ErrorCode::OriginInput: return "OriginInput";
    case ErrorCode::NotEscaped: return "NotEscaped";
    case ErrorCode::DegenerateChart: return "DegenerateChart";
    case ErrorCode::ResultantDegenerate: return "ResultantDegenerate";
    case ErrorCode::NearCriticalValue: return "NearCriticalValue";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::ExceptionalStart: return "ExceptionalStart";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::BranchCrossing: return "BranchCrossing";
    case ErrorCode::CriticalInput: return "CriticalInput";
    case ErrorCode::SectionPole: return "SectionPole";
    case ErrorCode::LoopNotClosed: return "LoopNotClosed";
    case ErrorCode::Obstructed: return "Obstructed";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

/// Library error. `param` carries an operation-specific number
/// (last good parameter, offending depth, ...) or NaN.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg,
          double param = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code), param_(param) {}

    ErrorCode code() const noexcept { return code_; }
    double param() const noexcept { return param_; }

private:
    ErrorCode code_;
    double param_;
};

inline double norm2(const Vec2& v) { return std::norm(v(0)) + std::norm(v(1)); }
inline double norm(const Vec2& v) { return std::hypot(std::abs(v(0)), std::abs(v(1))); }

inline bool finite(const Vec2& v) {
    return std::isfinite(v(0).real()) && std::isfinite(v(0).imag()) &&
           std::isfinite(v(1).real()) && std::isfinite(v(1).imag());
}

inline Vec2 make_vec(cplx a, cplx b) {
    Vec2 v;
    v << a, b;
    return v;
}

// Solves m x = b for 2x2 m; returns false if singular.
inline bool solve2(const Mat2& m, const Vec2& b, Vec2& x) {
    cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (det == cplx(0.0)) return false;
    x(0) = (m(1, 1) * b(0) - m(0, 1) * b(1)) / det;
    x(1) = (m(0, 0) * b(1) - m(1, 0) * b(0)) / det;
    return finite(x);
}

} // namespace c2dyn
