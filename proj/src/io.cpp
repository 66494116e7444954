#include "heatrisk/io.hpp"

#include "heatrisk/error.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace heatrisk {

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << content;
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

std::string costs_to_csv(std::span<const double> costs) {
    std::string out = "sample,cost\n";
    out.reserve(out.size() + costs.size() * 28);
    for (std::size_t s = 0; s < costs.size(); ++s) {
        out += std::to_string(s);
        out += ',';
        out += format_double(costs[s]);
        out += '\n';
    }
    return out;
}

void write_costs_csv(const std::filesystem::path& path, std::span<const double> costs) {
    write_text_file(path, costs_to_csv(costs));
}

std::vector<double> read_costs_csv(const std::filesystem::path& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> costs;
    auto fail = [&](const std::string& why) {
        throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "sample,cost") fail("expected header 'sample,cost'");
            continue;
        }
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail("expected two columns");
        const std::string field = line.substr(comma + 1);
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(field.c_str(), &end);
        if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) fail("malformed cost '" + field + "'");
        costs.push_back(v);
    }
    if (lineno == 0) fail("empty file");
    if (costs.empty()) fail("no cost rows");
    return costs;
}

}  // namespace heatrisk
