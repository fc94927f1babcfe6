#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace sppa {

namespace {

constexpr const char* kHeader = "replica,n,lambda,event,step_len,step_bound,dist_ref,F_hat,F_se";

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                in_quotes = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

template <class T>
T number(const std::string& s, const std::string& where) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(where + ": bad number '" + s + "'");
    return v;
}

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

} // namespace

void write_trace_csv(std::ostream& out, const ReplicaEnsemble& ens) {
    out << kHeader << '\n';
    for (std::size_t r = 0; r < ens.runs.size(); ++r) {
        for (const auto& row : ens.runs[r].rows) {
            out << r << ',' << row.n << ',';
            if (row.has_step)
                out << real(row.lambda) << ',' << quoted(row.event) << ',' << real(row.step_len) << ','
                    << real(row.step_bound);
            else
                out << ",,,";
            out << ',' << (row.dist_ref ? real(*row.dist_ref) : std::string()) << ',' << real(row.F_hat) << ','
                << real(row.F_se) << '\n';
        }
    }
}

void write_trace_csv(const std::string& path, const ReplicaEnsemble& ens) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace file '" + path + "'");
    write_trace_csv(out, ens);
}

ReplicaEnsemble read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || (line != kHeader && line != std::string(kHeader) + "\r"))
        throw ConfigError(path + ": unexpected trace header");
    std::map<std::size_t, RunTrace> runs;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto f = split_csv(line);
        if (f.size() != 9) throw ConfigError(where + ": expected 9 fields");
        TraceRow row;
        const auto r = number<std::size_t>(f[0], where);
        row.n = number<std::size_t>(f[1], where);
        row.has_step = !f[2].empty();
        if (row.has_step) {
            row.lambda = number<double>(f[2], where);
            row.event = f[3];
            row.step_len = number<double>(f[4], where);
            row.step_bound = number<double>(f[5], where);
        }
        if (!f[6].empty()) row.dist_ref = number<double>(f[6], where);
        row.F_hat = number<double>(f[7], where);
        row.F_se = number<double>(f[8], where);
        auto& run = runs[r];
        if (row.n != run.rows.size()) throw ConfigError(where + ": rows out of order");
        run.rows.push_back(std::move(row));
    }
    ReplicaEnsemble ens;
    std::size_t expect = 0;
    for (auto& [r, run] : runs) {
        if (r != expect++) throw ConfigError(path + ": replica indices are not contiguous");
        ens.runs.push_back(std::move(run));
    }
    if (ens.runs.empty()) throw ConfigError(path + ": trace has no rows");
    return ens;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

} // namespace sppa
