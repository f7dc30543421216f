#include "monet/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace monet::io {

namespace {

constexpr char kMagic[5] = {'P', 'C', 'S', 'Q', '1'};
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

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::istream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void write_pcsq(const std::string& path, const std::vector<PointCloud>& frames) {
    if (frames.empty()) {
        throw InputError("write_pcsq: no frames");
    }
    const Eigen::Index n = frames.front().rows();
    for (const auto& f : frames) {
        if (f.rows() != n || f.cols() != 3) {
            throw InputError("write_pcsq: frames must share one N x 3 shape");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out.write(kMagic, 5);
    out.put(static_cast<char>(kVersion));
    put_u32(out, static_cast<std::uint32_t>(frames.size()));
    put_u32(out, static_cast<std::uint32_t>(n));
    for (const auto& f : frames) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) {
                put_f32(out, static_cast<float>(f(i, c)));
            }
        }
    }
    if (!out) {
        throw ConfigError("write failed: " + path);
    }
}

std::vector<PointCloud> read_pcsq(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open: " + path);
    }
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kMagic, 5) != 0) {
        throw InputError("not a PCSQ file: " + path);
    }
    if (in.get() != kVersion) {
        throw InputError("unsupported PCSQ version: " + path);
    }
    const std::uint32_t frame_count = get_u32(in);
    const std::uint32_t point_count = get_u32(in);
    if (frame_count == 0 || point_count == 0) {
        throw InputError("PCSQ header declares an empty sequence: " + path);
    }
    std::vector<PointCloud> frames;
    frames.reserve(frame_count);
    for (std::uint32_t t = 0; t < frame_count; ++t) {
        PointCloud f(point_count, 3);
        for (std::uint32_t i = 0; i < point_count; ++i) {
            for (int c = 0; c < 3; ++c) {
                f(i, c) = static_cast<double>(get_f32(in));
            }
        }
        frames.push_back(std::move(f));
    }
    if (!in) {
        throw InputError("truncated PCSQ payload: " + path);
    }
    return frames;
}

void write_model_config(const std::string& path, const ModelConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["num_layers"] = std::to_string(cfg.num_layers());
    kv["variant"] = to_string(cfg.variant);
    kv["ablation"] = to_string(cfg.ablation);
    for (int i = 0; i < cfg.num_layers(); ++i) {
        const auto& l = cfg.layers[static_cast<std::size_t>(i)];
        const std::string p = "layer" + std::to_string(i) + ".";
        kv[p + "n"] = std::to_string(l.n_points);
        kv[p + "k"] = std::to_string(l.k);
        kv[p + "d_e"] = std::to_string(l.d_e);
        kv[p + "d_m"] = std::to_string(l.d_m);
        kv[p + "d_s"] = std::to_string(l.d_s);
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    for (const auto& [key, value] : kv) {
        out << key << "=" << value << "\n";
    }
}

ModelConfig read_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config: " + path);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("bad config line: " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw ConfigError("config missing key: " + key);
        }
        return it->second;
    };
    ModelConfig cfg;
    const int layers = std::stoi(get("num_layers"));
    cfg.variant = variant_from_string(get("variant"));
    cfg.ablation = ablation_from_string(get("ablation"));
    for (int i = 0; i < layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        LayerConfig l;
        l.n_points = std::stoi(get(p + "n"));
        l.k = std::stoi(get(p + "k"));
        l.d_e = std::stoi(get(p + "d_e"));
        l.d_m = std::stoi(get(p + "d_m"));
        l.d_s = std::stoi(get(p + "d_s"));
        cfg.layers.push_back(l);
    }
    cfg.validate(-1);
    return cfg;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out << "iteration,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        out << i << "," << format_double(losses[i]) << "\n";
    }
}

void write_eval_csv(const std::string& path, const train::EvalReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out << "method,frame,cd,emd,ms_per_prediction\n";
    for (const auto& row : report.rows) {
        out << row.method << "," << row.frame << "," << format_double(row.cd) << ","
            << format_double(row.emd) << "," << format_double(row.ms_per_prediction) << "\n";
    }
}

void write_frame_metrics_csv(const std::string& path, const std::vector<FrameMetrics>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out << "frame,cd,emd\n";
    for (const auto& row : rows) {
        out << row.frame << "," << format_double(row.cd) << "," << format_double(row.emd)
            << "\n";
    }
}

void write_pcsq_as_csv(const std::string& path, const std::vector<PointCloud>& frames) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out << "frame,point,x,y,z\n";
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& f = frames[t];
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            out << t << "," << i << "," << format_double(f(i, 0)) << ","
                << format_double(f(i, 1)) << "," << format_double(f(i, 2)) << "\n";
        }
    }
}

}  // namespace monet::io
