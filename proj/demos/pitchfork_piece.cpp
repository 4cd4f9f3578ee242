// Builds the pitchfork of width pi, prints the solve report and writes the
// field and its reflected surface.
#include <transol/geometry.hpp>
#include <transol/surfaces.hpp>

#include <cstdlib>
#include <iostream>

using namespace transol;

int main(int argc, char** argv) {
    PieceConfig cfg;
    cfg.h = argc > 1 ? std::atof(argv[1]) : pi / 32;
    const PieceResult p = construct_piece(SurfaceKind::pitchfork(pi), cfg);
    std::cout << p.report.to_json() << "\n";

    if (auto sb = slope_bound_scan(p.field, -1)) std::cout << "slope bound " << sb->to_json() << "\n";
    std::cout << "gauss map " << gauss_injectivity_sample(p.field, 20000, 1).to_json() << "\n";

    write_csv(p.field, "pitchfork.csv");
    write_obj(schwarz_reflect(p), "pitchfork.obj");
}
