#include "potlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace potlab {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::vector<std::filesystem::path> dump_field(const GridDomain& grid, const ScalarField& f,
                                              const std::filesystem::path& base) {
    if (f.grid != &grid) throw GridMismatch("dump_field: field not on this grid");
    std::filesystem::path pgm = base;
    pgm += ".pgm";
    std::filesystem::path csv = base;
    csv += ".csv";

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : f.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = hi - lo;
    if (!(span > 0.0)) span = 1.0; // constant field maps to 0

    {
        std::ofstream out(pgm, std::ios::binary);
        if (!out) throw Error("cannot open " + pgm.string());
        out << "P2\n" << grid.nx << " " << grid.ny << "\n65535\n";
        // PGM rows run top-down; lattice row ny-1 is the top
        for (int j = grid.ny - 1; j >= 0; --j) {
            for (int i = 0; i < grid.nx; ++i) {
                std::int32_t k = grid.site_to_interior[static_cast<std::size_t>(j) * grid.nx + i];
                long pix = 0;
                if (k >= 0)
                    pix = std::lround((f.values[static_cast<std::size_t>(k)] - lo) / span * 65535.0);
                out << pix << (i + 1 == grid.nx ? '\n' : ' ');
            }
        }
    }
    {
        CsvWriter out(csv);
        out.row({"cell_i", "cell_j", "value"});
        for (int k = 0; k < grid.size(); ++k)
            out.row({std::to_string(grid.site_i(k)), std::to_string(grid.site_j(k)),
                     format_double(f.values[static_cast<std::size_t>(k)])});
    }
    return {pgm, csv};
}

ScalarField read_field_csv(const GridDomain& grid, const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw Error("cannot open " + csv_path.string());
    ScalarField f(grid);
    std::vector<char> seen(static_cast<std::size_t>(grid.size()), 0);
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
            throw Error("malformed field csv row: " + line);
        int i = std::stoi(a), j = std::stoi(b);
        if (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny)
            throw Error("field csv cell out of range: " + line);
        std::int32_t k = grid.site_to_interior[static_cast<std::size_t>(j) * grid.nx + i];
        if (k < 0) throw Error("field csv cell not interior: " + line);
        double v;
        auto res = std::from_chars(c.data(), c.data() + c.size(), v);
        if (res.ec != std::errc{}) throw Error("bad value in field csv: " + line);
        if (seen[static_cast<std::size_t>(k)]) throw Error("duplicate cell in field csv: " + line);
        seen[static_cast<std::size_t>(k)] = 1;
        f.values[static_cast<std::size_t>(k)] = v;
    }
    for (char s : seen)
        if (!s) throw Error("field csv missing interior cells");
    return f;
}

std::uint64_t hash_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

CsvWriter::CsvWriter(const std::filesystem::path& p) : path(p) { buf_.reserve(1 << 16); }

CsvWriter::~CsvWriter() {
    std::ofstream out(path, std::ios::binary);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        buf_ += cells[i];
        buf_ += (i + 1 == cells.size()) ? "\n" : ",";
    }
}

} // namespace potlab
