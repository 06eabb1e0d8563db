#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "potlab/grid.hpp"

namespace potlab {

// Shortest round-trip decimal form via std::to_chars: locale-free and
// byte-stable, which the determinism contract of every CSV depends on.
std::string format_double(double x);

// Writes base.pgm (P2, affine rescale of interior values to 0..65535,
// exterior sites 0) and base.csv with rows cell_i,cell_j,value carrying the
// exact values. Returns the two paths written.
std::vector<std::filesystem::path> dump_field(const GridDomain& grid, const ScalarField& f,
                                              const std::filesystem::path& base);

// Reads a sidecar CSV produced by dump_field back onto the same grid; every
// interior cell must be present exactly once.
ScalarField read_field_csv(const GridDomain& grid, const std::filesystem::path& csv_path);

// FNV-1a 64 over raw bytes; manifest fingerprints, not security.
std::uint64_t hash_file(const std::filesystem::path& p);

struct CsvWriter {
    explicit CsvWriter(const std::filesystem::path& p);
    ~CsvWriter();
    void row(const std::vector<std::string>& cells);
    std::filesystem::path path;

private:
    std::string buf_;
};

} // namespace potlab
