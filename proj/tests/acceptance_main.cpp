// One line per acceptance criterion; exit status is nonzero if any fails.

#include <mfbsde/acceptance.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    std::uint64_t seed = 20240601;
    if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
    bool ok = true;
    mfbsde::acceptance_suite(seed, [&](const mfbsde::CriterionResult& r) {
        std::cout << mfbsde::format_criterion(r) << std::endl;
        ok = ok && r.passed;
    });
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << std::endl;
    return ok ? 0 : 1;
}
