#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fire {

struct VerifierResult {
    std::string name;
    int cases = 0;
    int violations = 0;
    int not_applicable = 0;
    double worst_margin = -1e300;  // max of measured - bound over applicable cases (<= slack passes)
    std::string first_failure;

    bool passed() const { return violations == 0; }
};

// Each verifier draws seeded random valid inputs and checks the inequality on
// every one; a single violation fails it.
VerifierResult verify_theorem1(int cases = 200, uint64_t seed = 101);
VerifierResult verify_theorem2(int cases = 100, uint64_t seed = 102);
VerifierResult verify_theorem3(int cases = 500, uint64_t seed = 103);
VerifierResult verify_theorem4(int cases = 500, uint64_t seed = 104);
VerifierResult verify_lemma_eigenvalue_interval(int cases = 500, uint64_t seed = 105);
VerifierResult verify_corollary_dormancy(int cases = 500, uint64_t seed = 106);

std::vector<VerifierResult> verify_all();

}  // namespace fire
