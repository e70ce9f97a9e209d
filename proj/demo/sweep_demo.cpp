// Coverage versus user altitude for three antenna tilts, printed as a small table.
//
//   sweep_demo [config-file]

#include <cstdio>
#include <exception>
#include <iostream>

#include "dronecov/cli.hpp"

int main(int argc, char** argv) {
    using namespace dronecov;
    try {
        SweepSpec spec;
        spec.name = "altitude";
        spec.base = cli::load_config(argc > 1 ? argv[1] : "");
        spec.axes = {{"ue_height_m", parse_grid("0:150:30")}, {"downtilt_deg", {10.0, 20.0, 30.0}}};
        const SweepResult result = sweep(spec, {0});

        std::printf("%8s", "h_D [m]");
        for (double tilt : spec.axes[1].values) std::printf("   tilt %4.0f", tilt);
        std::printf("\n");
        for (double h : spec.axes[0].values) {
            std::printf("%8.1f", h);
            for (double tilt : spec.axes[1].values)
                for (const SweepRow* row : result.curve("base", Method::kAnalytic, tilt))
                    if (row->param_1 == h) std::printf("   %9.5f", row->probability);
            std::printf("\n");
        }
        for (const CurveSummary& s : result.summaries)
            std::printf("tilt %2.0f: best altitude %.0f m (P = %.4f)\n", s.param_2.value_or(0.0), s.argmax_param_1,
                        s.max_probability);
    } catch (const std::exception& e) {
        std::cerr << "sweep_demo: " << e.what() << "\n";
        return 1;
    }
}
