// Calibrates helicoid axes for a few widths and reports the rescaled
// curvature of each piece.
#include <transol/surfaces.hpp>

#include <iostream>

using namespace transol;

int main() {
    for (double w : {pi / 2, pi / 4}) {
        PieceConfig cfg;
        cfg.h = w / 32;
        const PieceResult p = helicoid_axis_calibrate(w, cfg);
        std::cout << "w = " << w << ": " << p.calibration->to_json() << "\n";
    }
    std::cout << rescaled_helicoid_limit_check({pi / 2, pi / 4, pi / 8}).to_json() << "\n";
}
