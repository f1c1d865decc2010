#include "sl0/io.hpp"

#include "sl0/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>
#include <system_error>

namespace sl0::io {

namespace {

[[noreturn]] void parse_error(const std::string& origin, const std::string& what) {
    throw Error(ErrorCode::Parse, origin + ": " + what);
}

double parse_number(const std::string& token, const std::string& origin) {
    const char* first = token.data();
    const char* last = first + token.size();
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) parse_error(origin, "entry '" + token + "' is out of range");
    if (ec != std::errc() || ptr != last) parse_error(origin, "'" + token + "' is not a number");
    if (!std::isfinite(v)) parse_error(origin, "non-finite entry '" + token + "'");
    return v;
}

long parse_dimension(const std::string& token, const std::string& origin) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(token, &used);
    } catch (const std::exception&) {
        parse_error(origin, "bad dimension '" + token + "'");
    }
    if (used != token.size() || v < 1) parse_error(origin, "bad dimension '" + token + "'");
    return v;
}

}  // namespace

Matrix parse_matrix(std::istream& in, const std::string& origin) {
    std::string header;
    if (!std::getline(in, header)) parse_error(origin, "missing 'rows cols' header");
    std::istringstream hs(header);
    std::string rtok, ctok, extra;
    if (!(hs >> rtok >> ctok) || (hs >> extra)) parse_error(origin, "header must be 'rows cols'");
    const long rows = parse_dimension(rtok, origin);
    const long cols = parse_dimension(ctok, origin);

    Matrix a(rows, cols);
    std::string line;
    for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) {
            parse_error(origin, "expected " + std::to_string(rows) + " rows, got " + std::to_string(i));
        }
        std::istringstream ls(line);
        std::string tok;
        long j = 0;
        while (ls >> tok) {
            if (j == cols) parse_error(origin, "row " + std::to_string(i + 1) + " has too many entries");
            a(i, j++) = parse_number(tok, origin);
        }
        if (j != cols) parse_error(origin, "row " + std::to_string(i + 1) + " has too few entries");
    }
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) parse_error(origin, "trailing data");
    }
    return a;
}

Vector parse_vector(std::istream& in, const std::string& origin) {
    Matrix a = parse_matrix(in, origin);
    if (a.cols() == 1) return a.col(0);
    if (a.rows() == 1) return a.row(0).transpose();
    parse_error(origin, "expected a vector (one row or one column)");
}

void write_matrix(std::ostream& out, const Eigen::Ref<const Matrix>& a) {
    const auto old_precision = out.precision(17);
    out << a.rows() << ' ' << a.cols() << '\n';
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (j) out << ' ';
            out << a(i, j);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

void write_vector(std::ostream& out, const Eigen::Ref<const Vector>& v) { write_matrix(out, v); }

std::string matrix_to_string(const Eigen::Ref<const Matrix>& a) {
    std::ostringstream os;
    write_matrix(os, a);
    return os.str();
}

std::string vector_to_string(const Eigen::Ref<const Vector>& v) {
    std::ostringstream os;
    write_vector(os, v);
    return os.str();
}

Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_matrix(in, path.string());
}

Vector read_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_vector(in, path.string());
}

AtomicOutputs::~AtomicOutputs() {
    std::error_code ec;
    for (const auto& tmp : temporaries_) std::filesystem::remove(tmp, ec);
}

void AtomicOutputs::add(const std::filesystem::path& path, std::string contents) {
    pending_.emplace_back(path, std::move(contents));
}

void AtomicOutputs::commit() {
    std::vector<std::filesystem::path> staged;
    for (const auto& [path, contents] : pending_) {
        auto tmp = path;
        tmp += ".tmp";
        temporaries_.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out << contents;
        out.close();
        if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
        staged.push_back(tmp);
    }
    for (std::size_t i = 0; i < pending_.size(); ++i) {
        std::error_code ec;
        std::filesystem::rename(staged[i], pending_[i].first, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot rename onto " + pending_[i].first.string());
    }
    temporaries_.clear();
    pending_.clear();
}

}  // namespace sl0::io
