// Zero set of x^2 - y^2: one critical point with four arcs.
#include <transol/levelsets.hpp>

#include <iostream>

using namespace transol;

int main() {
    const ScalarField v = analytic_fixture("saddle", 1.0 / 64);
    const auto cps = find_critical_points(v);
    const ArcSet arcs = classify_arcs(extract_zero_arcs(v, cps), {});
    std::cout << arc_count_report(arcs).to_json() << "\n";
    arcs.write_csv(std::cout);
}
