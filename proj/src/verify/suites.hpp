#ifndef WSGAT_VERIFY_SUITES_HPP
#define WSGAT_VERIFY_SUITES_HPP

#include <functional>
#include <string>
#include <vector>

#include "verify/check_result.hpp"

namespace wsgat::verify {

inline constexpr double kOracleTolerance = 1e-10;

struct Property {
    std::string suite;  // gradcheck | oracle | metrics
    std::string module;
    std::string name;
    std::function<std::vector<CheckResult>()> run;
};

const std::vector<Property>& property_registry();

/// suite is gradcheck, oracle, metrics or all. Throws ConfigError otherwise.
std::vector<CheckResult> run_suite(const std::string& suite);

// Individual properties, exposed for the acceptance gate.
CheckResult dense_equivalence(std::size_t graphs = 100, std::uint64_t seed = 11);
/// Range and L1 normalization of attention on the same corpus.
std::vector<CheckResult> attention_invariants(std::size_t graphs = 100, std::uint64_t seed = 11);
CheckResult metric_bruteforce(const std::string& metric, std::size_t instances = 1000,
                              std::uint64_t seed = 13);
CheckResult f1_closed_form();

}  // namespace wsgat::verify

#endif  // WSGAT_VERIFY_SUITES_HPP
