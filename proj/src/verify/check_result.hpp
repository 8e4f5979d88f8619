#ifndef WSGAT_VERIFY_CHECK_RESULT_HPP
#define WSGAT_VERIFY_CHECK_RESULT_HPP

#include <string>

namespace wsgat::verify {

/// Outcome of one property. observed <= threshold means pass unless the
/// property sets passed explicitly.
struct CheckResult {
    std::string module;
    std::string property;
    bool passed = false;
    double observed = 0.0;
    double threshold = 0.0;
    std::string detail;
};

}  // namespace wsgat::verify

#endif  // WSGAT_VERIFY_CHECK_RESULT_HPP
