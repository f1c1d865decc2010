#pragma once

#include "sl0/linalg.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sl0::io {

// Text format: first line "rows cols", then `rows` lines of whitespace
// separated decimals. Vectors are written as a single column. Values are
// printed with 17 significant digits so they round-trip exactly.

Matrix parse_matrix(std::istream& in, const std::string& origin = "<stream>");
Vector parse_vector(std::istream& in, const std::string& origin = "<stream>");

void write_matrix(std::ostream& out, const Eigen::Ref<const Matrix>& a);
void write_vector(std::ostream& out, const Eigen::Ref<const Vector>& v);

Matrix read_matrix(const std::filesystem::path& path);
Vector read_vector(const std::filesystem::path& path);

/// Collects output files and publishes them together: contents go to
/// temporaries in the destination directory and are renamed into place by
/// commit(). Nothing is left behind if commit() is never reached.
class AtomicOutputs {
public:
    AtomicOutputs() = default;
    AtomicOutputs(const AtomicOutputs&) = delete;
    AtomicOutputs& operator=(const AtomicOutputs&) = delete;
    ~AtomicOutputs();

    void add(const std::filesystem::path& path, std::string contents);
    void commit();

private:
    std::vector<std::pair<std::filesystem::path, std::string>> pending_;
    std::vector<std::filesystem::path> temporaries_;
};

std::string matrix_to_string(const Eigen::Ref<const Matrix>& a);
std::string vector_to_string(const Eigen::Ref<const Vector>& v);

}  // namespace sl0::io
