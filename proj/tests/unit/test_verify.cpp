#include <doctest.h>

#include <set>

#include "verify/suites.hpp"
#include "wsgat/errors.hpp"

using namespace wsgat;

TEST_CASE("every registered property produces results in its suite") {
    const auto& registry = verify::property_registry();
    for (const std::string suite : {"gradcheck", "oracle", "metrics"}) {
        std::size_t expected = 0;
        std::set<std::string> modules;
        for (const auto& p : registry)
            if (p.suite == suite) {
                const auto results = p.run();
                INFO(p.name);
                CHECK_FALSE(results.empty());
                for (const auto& r : results) CHECK(r.module == p.module);
                expected += results.size();
                modules.insert(p.module);
            }
        const auto ran = verify::run_suite(suite);
        CHECK(ran.size() == expected);
        for (const auto& r : ran) CHECK(modules.count(r.module) == 1);
    }
    CHECK(verify::run_suite("all").size() ==
          verify::run_suite("gradcheck").size() + verify::run_suite("oracle").size() +
              verify::run_suite("metrics").size());
    CHECK_THROWS_AS(verify::run_suite("everything"), ConfigError);
}

TEST_CASE("oracle suite covers every dense-equivalence property") {
    std::set<std::string> names;
    for (const auto& p : verify::property_registry())
        if (p.suite == "oracle") names.insert(p.name);
    for (const char* required : {"dense_equivalence", "attention_invariants", "factored_matches_concat",
                                 "permutation_equivariance", "sign_sensitivity", "signed_softmax_negation",
                                 "dense_eigensolver"})
        CHECK(names.count(required) == 1);
}

TEST_CASE("model gradient checks pass") {
    for (const auto& r : verify::run_suite("gradcheck")) {
        INFO(r.property << " observed " << r.observed);
        CHECK(r.passed);
    }
}
