#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ioncav/sde.hpp"

namespace ioncav {

void write_ensemble(std::ostream& os, const Ensemble& e) {
    os << "# ioncav ensemble\n";
    os << "# t " << std::setprecision(17) << e.t << "\n";
    os << "# seed " << e.seed << "\n";
    os << "# n_traj " << e.n_traj << "\n";
    os << "# columns q1 p1 q2 p2 escaped\n";
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        const auto& x = e.points[i];
        os << x(0) << ' ' << x(1) << ' ' << x(2) << ' ' << x(3) << ' '
           << (e.escaped.empty() ? 0 : static_cast<int>(e.escaped[i])) << '\n';
    }
}

Ensemble read_ensemble(std::istream& is) {
    Ensemble e;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash >> key;
            if (key == "t") {
                ls >> e.t;
            } else if (key == "seed") {
                ls >> e.seed;
            }
            continue;
        }
        Vec4 x;
        int esc = 0;
        if (!(ls >> x(0) >> x(1) >> x(2) >> x(3))) {
            throw std::runtime_error("ensemble line " + std::to_string(lineno) + ": expected 4 numbers");
        }
        ls >> esc;
        e.points.push_back(x);
        e.escaped.push_back(static_cast<std::uint8_t>(esc != 0));
    }
    e.n_traj = e.points.size();
    return e;
}

}  // namespace ioncav
