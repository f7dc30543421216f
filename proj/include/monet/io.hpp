#pragma once

#include "monet/core.hpp"
#include "monet/model.hpp"
#include "monet/train.hpp"

#include <string>
#include <vector>

namespace monet::io {

/// PCSQ point cloud sequence container:
///   magic "PCSQ1" (5 bytes), version byte, frame_count u32 LE,
///   point_count u32 LE, then frame_count * point_count * 3 float32 LE
/// (x, y, z meters). 14-byte header; write -> read round trips are
/// bit-exact.
inline constexpr int kPcsqHeaderBytes = 14;

void write_pcsq(const std::string& path, const std::vector<PointCloud>& frames);
std::vector<PointCloud> read_pcsq(const std::string& path);

/// Flat key=value model configuration (layer sizes, k, widths, variant,
/// ablation), written sorted for provenance diffs.
void write_model_config(const std::string& path, const ModelConfig& cfg);
ModelConfig read_model_config(const std::string& path);

/// Loss curve CSV: "iteration,loss" header plus one row per iteration,
/// printed with round-trip precision so identical runs are byte-identical.
void write_loss_csv(const std::string& path, const std::vector<double>& losses);

/// Evaluation CSV: "method,frame,cd,emd,ms_per_prediction".
void write_eval_csv(const std::string& path, const train::EvalReport& report);

/// Per-frame metric CSV with header "frame,cd,emd".
struct FrameMetrics {
    int frame;
    double cd;
    double emd;
};
void write_frame_metrics_csv(const std::string& path, const std::vector<FrameMetrics>& rows);

/// PCSQ debug dump: "frame,point,x,y,z".
void write_pcsq_as_csv(const std::string& path, const std::vector<PointCloud>& frames);

std::string format_double(double v);

}  // namespace monet::io
