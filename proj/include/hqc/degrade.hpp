// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/diagnostics.hpp"
#include "hqc/imaging.hpp"
#include "hqc/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hqc {

struct RealRange {
    double min = 0.0;
    double max = 0.0;
};

struct IntRange {
    int min = 0;
    int max = 0;
};

enum class ResizeMode { bicubic, bilinear, area };
std::string_view to_string(ResizeMode m);
ResizeMode parse_resize_mode(std::string_view s);

struct BlurStageConfig {
    double probability = 1.0;
    IntRange kernel_size{7, 21};  // odd sizes only are drawn
    RealRange sigma{0.2, 3.0};
    double anisotropic_probability = 0.5;
    RealRange rotation{-3.141592653589793, 3.141592653589793};
};

struct ResizeStageConfig {
    RealRange scale{0.15, 1.5};
    std::vector<ResizeMode> modes{ResizeMode::bicubic, ResizeMode::bilinear, ResizeMode::area};
};

struct NoiseStageConfig {
    double gaussian_probability = 0.5;  // otherwise Poisson
    RealRange gaussian_sigma{1.0, 30.0};
    RealRange poisson_scale{0.05, 3.0};
    double gray_probability = 0.4;
};

struct JpegStageConfig {
    IntRange quality{30, 95};  // quality 100 bypasses the codec
};

struct OrderConfig {
    bool enabled = true;
    BlurStageConfig blur;
    ResizeStageConfig resize;
    NoiseStageConfig noise;
    JpegStageConfig jpeg;
};

struct FinalStageConfig {
    double sinc_probability = 0.8;
    IntRange sinc_kernel_size{7, 21};
    RealRange sinc_cutoff{1.0471975511965976, 3.141592653589793};  // radians, [pi/3, pi]
    int output_size = 512;
};

struct DegradationConfig {
    std::uint64_t seed = 0;
    int input_size = 512;
    OrderConfig first;
    OrderConfig second;
    FinalStageConfig final_stage;

    /// Throws ConfigError on an empty range, an even kernel size or a
    /// probability outside [0, 1].
    void validate() const;

    static DegradationConfig defaults();
    /// Ranges collapsed so that every stage is a no-op.
    static DegradationConfig identity();
};

/// JSON object with the same field names as the structs above; fields absent
/// from the text keep their value from `base`. Throws ConfigError.
DegradationConfig parse_degradation_config(std::string_view json_text, const DegradationConfig& base);
std::string degradation_config_to_json(const DegradationConfig& cfg);

/// Parameters drawn for one item; enough to replay the degradation without a generator.
struct BlurParams {
    bool applied = false;
    int kernel_size = 0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double rotation = 0.0;
};

struct ResizeParams {
    bool applied = false;
    double scale = 1.0;
    ResizeMode mode = ResizeMode::bicubic;
    int width = 0;
    int height = 0;
};

struct NoiseParams {
    bool applied = false;
    bool poisson = false;
    double strength = 0.0;  // gaussian sigma or poisson scale
    bool gray = false;
    std::uint64_t noise_seed = 0;
};

struct JpegParams {
    bool applied = false;
    int quality = 100;
};

struct OrderParams {
    BlurParams blur;
    ResizeParams resize;
    NoiseParams noise;
    JpegParams jpeg;
};

struct SincParams {
    bool applied = false;
    int kernel_size = 0;
    double cutoff = 0.0;
};

struct DegradationParams {
    OrderParams first;
    OrderParams second;
    SincParams sinc;
    int output_size = 512;
};

/// Draws every stage's parameters from generators keyed by (seed, crop_id, stage).
DegradationParams draw_degradation(const DegradationConfig& cfg, const std::string& crop_id, int width, int height);

/// Deterministic application of drawn parameters; result is quantized to 8 bits.
ImageBuffer apply_degradation(const ImageBuffer& hq, const DegradationParams& params);

/// draw_degradation + apply_degradation. Throws std::invalid_argument unless
/// the input is input_size x input_size.
ImageBuffer degrade(const ImageBuffer& hq, const DegradationConfig& cfg, const std::string& crop_id,
                    DegradationParams* drawn = nullptr);

/// Anisotropic Gaussian kernel, normalized, row-major ksize x ksize.
std::vector<double> gaussian_kernel(int ksize, double sigma_x, double sigma_y, double rotation);
/// Circular low-pass (jinc) kernel with the given cutoff in radians, normalized.
std::vector<double> sinc_kernel(int ksize, double cutoff);

struct PairRecord {
    std::string crop_id;
    std::string hq_path;  // as given by the selection manifest entry
    std::string lq_path;  // relative to the pair manifest directory
    std::string codec;
    DegradationParams params;
};

inline constexpr std::string_view kPairSchema = "hqc.pairs/1";

std::string params_to_json(const DegradationParams& p);
DegradationParams params_from_json(const std::string& text);

/// Degrades every manifest entry that carries an hq_path (resolved against
/// `manifest_dir`), writing `<out_dir>/lq/<hq file name>` (PNG) and
/// `<out_dir>/pairs.jsonl`. Unreadable HQ files are skipped, logged and
/// counted under "pairs_skipped".
std::vector<PairRecord> build_pairs(const SelectionManifest& manifest, const std::filesystem::path& manifest_dir,
                                    const DegradationConfig& cfg, const std::filesystem::path& out_dir, int workers,
                                    Diagnostics& diag);

std::vector<PairRecord> load_pair_manifest(const std::filesystem::path& path);

}  // namespace hqc
