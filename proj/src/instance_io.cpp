#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "loopsrg/error.hpp"
#include "loopsrg/markov.hpp"

namespace loopsrg {

using nlohmann::json;

std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_instance(const MarkovNet& m, const json& meta)
{
    const Graph& g = m.graph();
    std::string out = "{\n  \"n\": " + std::to_string(g.num_vertices()) + ",\n  \"edges\": [";
    for (int id = 0; id < g.num_edges(); ++id) {
        const Edge& e = g.edge(id);
        out += id ? ",\n    [" : "\n    [";
        out += std::to_string(e.u) + ", " + std::to_string(e.v) + ", " + format_real(m.couplings()[id]) + "]";
    }
    out += g.num_edges() ? "\n  ],\n  \"h\": [" : "],\n  \"h\": [";
    for (int i = 0; i < g.num_vertices(); ++i) {
        out += i ? ",\n    " : "\n    ";
        out += format_real(m.fields()[i]);
    }
    out += g.num_vertices() ? "\n  ]" : "]";
    if (!meta.is_null() && !meta.empty())
        out += ",\n  \"meta\": " + meta.dump();
    out += "\n}\n";
    return out;
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset)
{
    int line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i)
        if (text[i] == '\n')
            ++line;
    return line;
}

// Line on which element `index` of the top-level array `key` starts (the
// closing bracket's line when the array is shorter), or 0 when the array is
// not found. Only used to decorate error messages.
int element_line(const std::string& text, const std::string& key, std::size_t index)
{
    int depth = 0;
    int line = 1;
    bool in_string = false;
    bool escaped = false;
    std::string current;
    std::string last_key;
    bool in_target = false;
    bool expect_element = false;
    std::size_t element = 0;
    for (char ch : text) {
        if (ch == '\n')
            ++line;
        if (in_string) {
            if (escaped) {
                escaped = false;
                current += ch;
            } else if (ch == '\\') {
                escaped = true;
            } else if (ch == '"') {
                in_string = false;
                if (depth == 1)
                    last_key = current;
            } else {
                current += ch;
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch)))
            continue;
        if (in_target && depth == 2 && expect_element) {
            if (element == index)
                return line;
            expect_element = false;
        }
        switch (ch) {
        case '"':
            in_string = true;
            current.clear();
            break;
        case '{':
        case '[':
            ++depth;
            if (depth == 2 && ch == '[' && last_key == key) {
                in_target = true;
                expect_element = true;
                element = 0;
            }
            break;
        case '}':
        case ']':
            // Element not present: point at the closing bracket.
            if (depth == 2 && in_target)
                return line;
            --depth;
            break;
        case ',':
            if (in_target && depth == 2) {
                ++element;
                expect_element = true;
            }
            break;
        default:
            break;
        }
    }
    return 0;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what)
{
    throw ValidationError(origin + (line > 0 ? ":" + std::to_string(line) : std::string{}) + ": " + what);
}

} // namespace

Instance parse_instance(const std::string& text, const std::string& origin)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(origin, line_of_offset(text, e.byte), std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object())
        fail(origin, 1, "instance must be a JSON object");
    for (const char* field : {"n", "edges", "h"})
        if (!doc.contains(field))
            fail(origin, 0, std::string("missing field '") + field + "'");
    if (!doc["n"].is_number_integer() || doc["n"].get<long long>() < 0)
        fail(origin, 0, "'n' must be a non-negative integer");
    const int n = doc["n"].get<int>();
    if (!doc["edges"].is_array())
        fail(origin, 0, "'edges' must be an array");
    if (!doc["h"].is_array())
        fail(origin, 0, "'h' must be an array");

    std::vector<Edge> edges;
    std::vector<double> w;
    const auto& jedges = doc["edges"];
    for (std::size_t k = 0; k < jedges.size(); ++k) {
        const auto& item = jedges[k];
        const int line = element_line(text, "edges", k);
        if (!item.is_array() || item.size() != 3 || !item[0].is_number_integer() || !item[1].is_number_integer() ||
            !item[2].is_number())
            fail(origin, line, "edges[" + std::to_string(k) + "] must be [u, v, w]");
        const long long u = item[0].get<long long>();
        const long long v = item[1].get<long long>();
        if (u < 0 || v < 0 || u >= n || v >= n)
            fail(origin, line, "edges[" + std::to_string(k) + "] references a vertex outside [0, " + std::to_string(n) + ")");
        if (u >= v)
            fail(origin, line, "edges[" + std::to_string(k) + "] must satisfy u < v");
        edges.push_back({static_cast<Vertex>(u), static_cast<Vertex>(v)});
        w.push_back(item[2].get<double>());
    }
    // Couplings follow the file order; re-key them to canonical order.
    std::vector<std::size_t> order(edges.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (edges[order[k]] == edges[order[k - 1]])
            fail(origin, element_line(text, "edges", std::max(order[k], order[k - 1])),
                 "duplicate edge " + to_string(edges[order[k]]));
    std::vector<double> w_sorted;
    std::vector<Edge> sorted_edges;
    for (auto k : order) {
        sorted_edges.push_back(edges[k]);
        w_sorted.push_back(w[k]);
    }

    const auto& jh = doc["h"];
    if (static_cast<int>(jh.size()) != n)
        fail(origin, element_line(text, "h", std::min(jh.size(), static_cast<std::size_t>(n))),
             "'h' has " + std::to_string(jh.size()) + " entries, expected " + std::to_string(n));
    std::vector<double> h;
    for (std::size_t i = 0; i < jh.size(); ++i) {
        if (!jh[i].is_number())
            fail(origin, element_line(text, "h", i), "h[" + std::to_string(i) + "] is not a number");
        h.push_back(jh[i].get<double>());
    }

    Instance inst;
    try {
        inst.model = MarkovNet(Graph(n, std::move(sorted_edges)), std::move(h), std::move(w_sorted));
    } catch (const ValidationError& e) {
        fail(origin, 0, e.what());
    }
    if (doc.contains("meta"))
        inst.meta = doc["meta"];
    return inst;
}

void write_instance(const MarkovNet& m, const std::string& path, const json& meta)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError(path, "cannot open instance file for writing");
    out << format_instance(m, meta);
    if (!out)
        throw IoError(path, "write failed");
}

Instance read_instance(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path, "cannot open instance file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_instance(buffer.str(), path);
}

} // namespace loopsrg
