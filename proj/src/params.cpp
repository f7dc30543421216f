#include "monet/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

namespace monet::nn {

namespace {

constexpr char kMagic[4] = {'M', 'N', 'C', 'P'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_record(std::ostream& out, const std::string& name, const Mat& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_f64(out, m(r, c));
        }
    }
}

}  // namespace

Mat& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (entries_.count(name)) {
        throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
    }
    Entry e;
    e.value = Mat::Zero(rows, cols);
    e.grad = Mat::Zero(rows, cols);
    e.adam_m = Mat::Zero(rows, cols);
    e.adam_v = Mat::Zero(rows, cols);
    return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw ConfigError("ParamStore: unknown parameter '" + name + "'");
    }
    return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw ConfigError("ParamStore: unknown parameter '" + name + "'");
    }
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) {
        e.grad.setZero();
    }
}

void ParamStore::fill(double v) {
    for (auto& [name, e] : entries_) {
        e.value.setConstant(v);
    }
}

double ParamStore::grad_norm() const {
    double sq = 0.0;
    for (const auto& [name, e] : entries_) {
        sq += e.grad.squaredNorm();
    }
    return std::sqrt(sq);
}

void ParamStore::clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& [name, e] : entries_) {
            e.grad *= s;
        }
    }
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) {
        n += static_cast<std::size_t>(e.value.size());
    }
    return n;
}

void ParamStore::save(const std::string& path, bool with_optimizer_state) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));

    std::map<std::string, const Mat*> records;
    Mat step(1, 1);
    for (const auto& [name, e] : entries_) {
        records.emplace(name, &e.value);
        if (with_optimizer_state) {
            records.emplace("#m." + name, &e.adam_m);
            records.emplace("#v." + name, &e.adam_v);
        }
    }
    if (with_optimizer_state) {
        step(0, 0) = static_cast<double>(adam_step_count);
        records.emplace("#step", &step);
    }
    put_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& [name, m] : records) {
        write_record(out, name, *m);
    }
    if (!out) {
        throw ConfigError("checkpoint write failed: " + path);
    }
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open checkpoint: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ConfigError("bad checkpoint magic: " + path);
    }
    const int version = in.get();
    if (version != kVersion) {
        throw ConfigError("unsupported checkpoint version");
    }
    const std::uint32_t count = get_u32(in);

    std::map<std::string, Mat> records;
    for (std::uint32_t rec = 0; rec < count; ++rec) {
        const std::uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        Mat m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                m(r, c) = get_f64(in);
            }
        }
        if (!in) {
            throw ConfigError("truncated checkpoint: " + path);
        }
        records.emplace(std::move(name), std::move(m));
    }

    ParamStore store;
    for (auto& [name, m] : records) {
        if (name.empty() || name[0] == '#') continue;
        store.create(name, m.rows(), m.cols()) = std::move(m);
    }
    for (auto& [name, m] : records) {
        if (name == "#step") {
            store.adam_step_count = static_cast<std::int64_t>(m(0, 0));
        } else if (name.rfind("#m.", 0) == 0) {
            store.at(name.substr(3)).adam_m = std::move(m);
        } else if (name.rfind("#v.", 0) == 0) {
            store.at(name.substr(3)).adam_v = std::move(m);
        }
    }
    return store;
}

void glorot_init(ParamStore& params, const std::string& name, std::uint64_t seed) {
    Mat& w = params.value(name);
    // fnv1a over the name keys the stream so init does not depend on
    // registration order
    std::uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::mt19937_64 rng(seed ^ h);
    const double fan_in = static_cast<double>(w.rows());
    const double fan_out = static_cast<double>(w.cols());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = dist(rng);
        }
    }
}

}  // namespace monet::nn
