#include "hms/trajectory_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hms {

namespace {

constexpr const char* kHeader = "frame,roll,pitch,yaw,tx,ty,tz";

[[noreturn]] void fail(const std::string& name, int line, const std::string& what) {
    throw std::runtime_error("trajectory " + name + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& name, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        fail(name, line, "bad number '" + s + "'");
    }
    if (pos != s.size()) fail(name, line, "trailing characters in number '" + s + "'");
    if (!std::isfinite(v)) fail(name, line, "non-finite value '" + s + "'");
    return v;
}

}  // namespace

std::vector<PoseFrame> read_trajectory(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) fail(name, 1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) fail(name, 1, "expected header '" + std::string(kHeader) + "', got '" + line + "'");

    std::vector<PoseFrame> frames;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 7) {
            fail(name, lineno, "expected 7 fields, got " + std::to_string(fields.size()));
        }
        const long idx = std::strtol(fields[0].c_str(), nullptr, 10);
        if (idx != static_cast<long>(frames.size())) {
            fail(name, lineno, "frame index " + fields[0] + " out of order (expected " +
                                   std::to_string(frames.size()) + ")");
        }
        PoseFrame f;
        f.roll = parse_double(fields[1], name, lineno);
        f.pitch = parse_double(fields[2], name, lineno);
        f.yaw = parse_double(fields[3], name, lineno);
        f.tx = parse_double(fields[4], name, lineno);
        f.ty = parse_double(fields[5], name, lineno);
        f.tz = parse_double(fields[6], name, lineno);
        frames.push_back(f);
    }
    return frames;
}

std::vector<PoseFrame> read_trajectory_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file '" + path + "'");
    return read_trajectory(in, path);
}

void write_trajectory(std::ostream& out, const std::vector<PoseFrame>& frames) {
    out << kHeader << "\n";
    char buf[256];
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const PoseFrame& f = frames[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, f.roll,
                      f.pitch, f.yaw, f.tx, f.ty, f.tz);
        out << buf;
    }
}

void write_trajectory_file(const std::string& path, const std::vector<PoseFrame>& frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory file '" + path + "'");
    write_trajectory(out, frames);
    if (!out.good()) throw std::runtime_error("write failed for trajectory file '" + path + "'");
}

}  // namespace hms
