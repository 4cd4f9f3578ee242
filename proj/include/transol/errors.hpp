#pragma once

#include <stdexcept>
#include <string>

namespace transol {

// Every library failure carries a stable name so callers (and the CLI) can
// map it to an exit code without parsing messages.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define TRANSOL_DEFINE_ERROR(cls)                                        \
    class cls : public Error {                                           \
    public:                                                              \
        explicit cls(const std::string& what) : Error(#cls, what) {}     \
    };

TRANSOL_DEFINE_ERROR(InvalidDomain)
TRANSOL_DEFINE_ERROR(GridTooCoarse)
TRANSOL_DEFINE_ERROR(NotInterior)
TRANSOL_DEFINE_ERROR(InvalidBoundary)
TRANSOL_DEFINE_ERROR(LinearSolverFailure)
TRANSOL_DEFINE_ERROR(InvalidWidth)
TRANSOL_DEFINE_ERROR(TruncationTooTight)
TRANSOL_DEFINE_ERROR(CalibrationFailed)
TRANSOL_DEFINE_ERROR(RefuseUnconverged)
TRANSOL_DEFINE_ERROR(InvalidAxis)
TRANSOL_DEFINE_ERROR(SectorTooWide)
TRANSOL_DEFINE_ERROR(InvalidRadius)
TRANSOL_DEFINE_ERROR(NoOverlap)
TRANSOL_DEFINE_ERROR(NoRegion)
TRANSOL_DEFINE_ERROR(NotThetaGraph)
TRANSOL_DEFINE_ERROR(BoundaryContact)
TRANSOL_DEFINE_ERROR(InvalidArgument)

#undef TRANSOL_DEFINE_ERROR

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, int stage, double residual)
        : Error("NonConvergence", what), stage_(stage), residual_(residual) {}
    int stage() const noexcept { return stage_; }
    double residual() const noexcept { return residual_; }

private:
    int stage_;
    double residual_;
};

}  // namespace transol
