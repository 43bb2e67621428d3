#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>

#include "loopsrg/error.hpp"
#include "loopsrg/experiments.hpp"

namespace loopsrg {

namespace {

std::string real10(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::string optional_real(const std::optional<double>& x) { return x ? real10(*x) : std::string{}; }

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what)
{
    throw ValidationError(origin + ":" + std::to_string(line) + ": " + what);
}

double parse_real(const std::string& s, const std::string& origin, int line, const char* column)
{
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0')
        fail(origin, line, std::string("bad ") + column + " '" + s + "'");
    return v;
}

} // namespace

std::string format_csv(std::vector<ExperimentRow> rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
        return std::tie(a.seed, a.param, a.method) < std::tie(b.seed, b.param, b.method);
    });
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += r.experiment + "," + std::to_string(r.seed) + "," + real10(r.param) + "," + r.method + "," +
               optional_real(r.error_z) + "," + optional_real(r.error_l1) + "," + std::to_string(r.iterations) + "," +
               (r.converged ? "1" : "0") + "\n";
    }
    return out;
}

void write_csv(const std::vector<ExperimentRow>& rows, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError(path, "cannot open CSV file for writing");
    out << format_csv(rows);
    if (!out)
        throw IoError(path, "write failed");
}

std::vector<ExperimentRow> parse_csv(const std::string& text, const std::string& origin)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<ExperimentRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (lineno == 1) {
            if (line != kCsvHeader)
                fail(origin, lineno, "unexpected CSV header");
            continue;
        }
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        if (cells.size() != 8)
            fail(origin, lineno, "expected 8 columns, found " + std::to_string(cells.size()));
        ExperimentRow r;
        r.experiment = cells[0];
        char* end = nullptr;
        r.seed = std::strtoull(cells[1].c_str(), &end, 10);
        if (cells[1].empty() || *end != '\0')
            fail(origin, lineno, "bad seed '" + cells[1] + "'");
        r.param = parse_real(cells[2], origin, lineno, "param");
        r.method = cells[3];
        if (!cells[4].empty())
            r.error_z = parse_real(cells[4], origin, lineno, "error_z");
        if (!cells[5].empty())
            r.error_l1 = parse_real(cells[5], origin, lineno, "error_l1");
        r.iterations = static_cast<int>(parse_real(cells[6], origin, lineno, "iterations"));
        if (cells[7] != "0" && cells[7] != "1")
            fail(origin, lineno, "bad converged flag '" + cells[7] + "'");
        r.converged = cells[7] == "1";
        rows.push_back(std::move(r));
    }
    if (lineno == 0)
        fail(origin, 1, "empty CSV");
    return rows;
}

std::vector<ExperimentRow> read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path, "cannot open CSV file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), path);
}

} // namespace loopsrg
