// Three-spin instance built from all six allowed patterns on one triple, with
// the penalty on 000. Prints the perturbative crossing estimate next to the
// exact gap scan.
#include <cstdio>

#include "qaa/perturbation.hpp"
#include "qaa/spectrum.hpp"

int main()
{
    using namespace qaa;
    Instance inst;
    inst.n = 3;
    inst.plants = {BitString::zeros(3), BitString::ones(3)};
    for (const auto& p : allowed_patterns)
        inst.clauses.push_back({{0, 1, 2}, p});
    inst = add_penalty(inst, Plant::zeros);

    const auto coeffs = FieldCoefficients::uniform(3);
    const auto rep = perturbation_report(inst, coeffs);
    std::printf("e2_L = %.6f  e2_U = %.6f  delta2 = %.6f\n", rep.e2_L, rep.e2_U, rep.delta2);
    std::printf("d = [%.4f %.4f %.4f]\n", rep.d[0], rep.d[1], rep.d[2]);
    if (rep.s_star)
        std::printf("predicted crossing s* = %.4f\n", *rep.s_star);

    std::printf("\n  s      E0        E1        gap\n");
    for (const auto& r : spectrum_scan(inst, coeffs, make_grid(0.0, 1.0, 0.1)))
        std::printf("%5.2f  %8.5f  %8.5f  %8.5f\n", r.s, r.E0, r.E1, r.gap());
    return 0;
}
