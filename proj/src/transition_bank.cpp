#include "flowcast/transition_bank.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace flowcast {

namespace {

constexpr int kBankFormatVersion = 1;

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TransitionBank extract_transitions(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw NoData("extract_transitions: no trajectories given");
    const int d = trajectories.front().states.dim;
    std::size_t total = 0;
    for (const Trajectory& tr : trajectories) {
        tr.validate();
        if (tr.states.dim != d)
            throw DimensionMismatch("extract_transitions: trajectory '" + tr.id + "' has dimension " +
                                    std::to_string(tr.states.dim) + ", expected " + std::to_string(d));
        total += tr.states.steps - 1;
    }
    std::vector<double> x1, x2;
    x1.reserve(total * d);
    x2.reserve(total * d);
    std::vector<TransitionSource> sources;
    sources.reserve(total);
    for (const Trajectory& tr : trajectories) {
        for (std::size_t tau = 0; tau + 1 < tr.states.steps; ++tau) {
            const auto a = tr.states.row(tau);
            const auto b = tr.states.row(tau + 1);
            x1.insert(x1.end(), a.begin(), a.end());
            x2.insert(x2.end(), b.begin(), b.end());
            sources.push_back({tr.id, tau});
        }
    }
    return TransitionBank(d, std::move(x1), std::move(x2), std::move(sources));
}

void save_bank(const TransitionBank& bank, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = kBankFormatVersion;
    j["d"] = bank.dim();
    j["M"] = bank.size();
    const std::size_t d = static_cast<std::size_t>(bank.dim());
    auto rows = [&](const std::vector<double>& flat) {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t r = 0; r < bank.size(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t i = 0; i < d; ++i) row.push_back(flat[r * d + i]);
            out.push_back(std::move(row));
        }
        return out;
    };
    j["x1"] = rows(bank.x1_flat());
    j["x2"] = rows(bank.x2_flat());
    nlohmann::json sources = nlohmann::json::array();
    for (const TransitionSource& s : bank.sources())
        sources.push_back({{"trajectory", s.trajectory_id}, {"step", s.step}});
    j["sources"] = std::move(sources);
    j["scale"] = bank.scale();
    // M counts one transition per consecutive pair, i.e. sum_n (T_n - 1);
    // recorded so downstream reports never leave the convention implicit.
    j["meta"] = {{"m_count_convention", "sum_over_trajectories(T_n - 1)"},
                 {"content_hash", bank.content_hash()}};

    std::ofstream out(path);
    if (!out) throw IoError("save_bank: cannot open '" + path.string() + "' for writing");
    out << j.dump(1, '\t') << '\n';
    if (!out) throw IoError("save_bank: write failed for '" + path.string() + "'");
}

TransitionBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_bank: cannot open '" + path.string() + "'");
    if (in.peek() == std::ifstream::traits_type::eof())
        throw NoData("load_bank: '" + path.string() + "' is empty");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("load_bank: '" + path.string() + "': " + e.what());
    }
    try {
        if (!j.contains("d") || !j.contains("x1") || !j.contains("x2"))
            throw ParseError("load_bank: missing required fields in '" + path.string() + "'");
        const int d = j.at("d").get<int>();
        const auto& jx1 = j.at("x1");
        const auto& jx2 = j.at("x2");
        if (jx1.size() != jx2.size())
            throw DimensionMismatch("load_bank: x1/x2 record counts differ");
        if (jx1.empty()) throw NoData("load_bank: bank file has no transitions");
        std::vector<double> x1, x2;
        x1.reserve(jx1.size() * d);
        x2.reserve(jx2.size() * d);
        std::size_t line = 0;
        for (std::size_t r = 0; r < jx1.size(); ++r, ++line) {
            if (static_cast<int>(jx1[r].size()) != d || static_cast<int>(jx2[r].size()) != d)
                throw DimensionMismatch("load_bank: record " + std::to_string(r) +
                                        " has mixed dimensions");
            for (const auto& v : jx1[r]) x1.push_back(v.get<double>());
            for (const auto& v : jx2[r]) x2.push_back(v.get<double>());
        }
        std::vector<TransitionSource> sources;
        if (j.contains("sources")) {
            for (const auto& s : j.at("sources"))
                sources.push_back({s.at("trajectory").get<std::string>(), s.at("step").get<std::size_t>()});
        }
        if (j.contains("M") && j.at("M").get<std::size_t>() != jx1.size())
            throw ParseError("load_bank: declared M does not match record count");
        return TransitionBank(d, std::move(x1), std::move(x2), std::move(sources));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("load_bank: '" + path.string() + "': " + e.what());
    }
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
    trajectory.validate();
    std::ofstream out(path);
    if (!out) throw IoError("write_trajectory_csv: cannot open '" + path.string() + "'");
    out << 't';
    for (int i = 0; i < trajectory.states.dim; ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t r = 0; r < trajectory.states.steps; ++r) {
        out << format_full(static_cast<double>(r) * trajectory.dt);
        for (double v : trajectory.states.row(r)) out << ',' << format_full(v);
        out << '\n';
    }
    if (!out) throw IoError("write_trajectory_csv: write failed for '" + path.string() + "'");
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_trajectory_csv: cannot open '" + path.string() + "'");
    std::string header;
    if (!std::getline(in, header)) throw NoData("read_trajectory_csv: empty file '" + path.string() + "'");
    int d = 0;
    {
        std::stringstream ss(header);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                if (cell != "t")
                    throw ParseError("read_trajectory_csv: header must start with 't' in '" +
                                     path.string() + "'");
                first = false;
            } else {
                ++d;
            }
        }
    }
    if (d < 1) throw ParseError("read_trajectory_csv: no state columns in '" + path.string() + "'");

    std::vector<double> times;
    std::vector<double> data;
    std::string linebuf;
    std::size_t lineno = 1;
    while (std::getline(in, linebuf)) {
        ++lineno;
        if (linebuf.empty()) continue;
        std::stringstream ss(linebuf);
        std::string cell;
        int col = -1;  // -1 is the time column
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                throw ParseError("read_trajectory_csv: bad number at line " + std::to_string(lineno) +
                                 " of '" + path.string() + "'");
            if (col == -1)
                times.push_back(v);
            else
                data.push_back(v);
            ++col;
        }
        if (col != d)
            throw ParseError("read_trajectory_csv: wrong column count at line " +
                             std::to_string(lineno) + " of '" + path.string() + "'");
    }
    if (times.size() < 2) throw NoData("read_trajectory_csv: fewer than 2 rows in '" + path.string() + "'");

    Trajectory tr;
    tr.id = path.stem().string();
    tr.dt = times[1] - times[0];
    tr.states.steps = times.size();
    tr.states.dim = d;
    tr.states.data = std::move(data);
    tr.validate();
    return tr;
}

}  // namespace flowcast
