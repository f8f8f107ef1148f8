// SPDX-License-Identifier: Apache-2.0

#include "hqc/degrade.hpp"

#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/keyed_rng.hpp"
#include "hqc/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

namespace hqc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr int kMinResizeSide = 8;

enum Stage : std::uint32_t { blur = 0, resize = 1, noise = 2, jpeg = 3 };
constexpr std::uint32_t kStagesPerOrder = 4;
constexpr std::uint32_t kSincStage = 2 * kStagesPerOrder;

void check_range(const RealRange& r, const std::string& name, double lo_bound) {
    if (!(std::isfinite(r.min) && std::isfinite(r.max)) || r.min > r.max || r.min < lo_bound) {
        throw ConfigError("invalid range for " + name);
    }
}

void check_prob(double p, const std::string& name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(name + " must lie in [0, 1]");
}

void check_kernel(const IntRange& r, const std::string& name) {
    if (r.min > r.max || r.min < 1 || r.min % 2 == 0 || r.max % 2 == 0) {
        throw ConfigError(name + " must be a non-empty range of odd sizes");
    }
}

void validate_order(const OrderConfig& o, const std::string& prefix) {
    check_prob(o.blur.probability, prefix + ".blur.probability");
    check_kernel(o.blur.kernel_size, prefix + ".blur.kernel_size");
    check_range(o.blur.sigma, prefix + ".blur.sigma", 0.0);
    check_prob(o.blur.anisotropic_probability, prefix + ".blur.anisotropic_probability");
    check_range(o.blur.rotation, prefix + ".blur.rotation", -1e9);
    check_range(o.resize.scale, prefix + ".resize.scale", 1e-6);
    if (o.resize.modes.empty()) throw ConfigError(prefix + ".resize.modes must not be empty");
    check_prob(o.noise.gaussian_probability, prefix + ".noise.gaussian_probability");
    check_range(o.noise.gaussian_sigma, prefix + ".noise.gaussian_sigma", 0.0);
    check_range(o.noise.poisson_scale, prefix + ".noise.poisson_scale", 0.0);
    check_prob(o.noise.gray_probability, prefix + ".noise.gray_probability");
    if (o.jpeg.quality.min > o.jpeg.quality.max || o.jpeg.quality.min < 1 || o.jpeg.quality.max > 100) {
        throw ConfigError(prefix + ".jpeg.quality must be a non-empty range within [1, 100]");
    }
}

int draw_odd(KeyedRng& rng, const IntRange& r) {
    const int count = (r.max - r.min) / 2 + 1;
    return r.min + 2 * rng.uniform_int(0, count - 1);
}

OrderParams draw_order(const OrderConfig& o, std::uint64_t seed, const std::string& id, std::uint32_t base, int& w,
                       int& h) {
    OrderParams p;
    if (!o.enabled) return p;
    {
        KeyedRng rng(seed, id, base + Stage::blur);
        const bool use = rng.bernoulli(o.blur.probability);
        p.blur.kernel_size = draw_odd(rng, o.blur.kernel_size);
        p.blur.sigma_x = rng.uniform(o.blur.sigma.min, o.blur.sigma.max);
        if (rng.bernoulli(o.blur.anisotropic_probability)) {
            p.blur.sigma_y = rng.uniform(o.blur.sigma.min, o.blur.sigma.max);
            p.blur.rotation = rng.uniform(o.blur.rotation.min, o.blur.rotation.max);
        } else {
            p.blur.sigma_y = p.blur.sigma_x;
        }
        p.blur.applied = use && p.blur.sigma_x > 0.0 && p.blur.sigma_y > 0.0;
    }
    {
        KeyedRng rng(seed, id, base + Stage::resize);
        p.resize.scale = rng.uniform(o.resize.scale.min, o.resize.scale.max);
        p.resize.mode = o.resize.modes[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(o.resize.modes.size()) - 1))];
        p.resize.width = std::max(kMinResizeSide, static_cast<int>(std::lround(w * p.resize.scale)));
        p.resize.height = std::max(kMinResizeSide, static_cast<int>(std::lround(h * p.resize.scale)));
        p.resize.applied = p.resize.width != w || p.resize.height != h;
        if (p.resize.applied) {
            w = p.resize.width;
            h = p.resize.height;
        }
    }
    {
        KeyedRng rng(seed, id, base + Stage::noise);
        p.noise.poisson = !rng.bernoulli(o.noise.gaussian_probability);
        p.noise.strength = p.noise.poisson ? rng.uniform(o.noise.poisson_scale.min, o.noise.poisson_scale.max)
                                           : rng.uniform(o.noise.gaussian_sigma.min, o.noise.gaussian_sigma.max);
        p.noise.gray = rng.bernoulli(o.noise.gray_probability);
        p.noise.noise_seed = rng.next_u64();
        p.noise.applied = p.noise.strength > 0.0;
    }
    {
        KeyedRng rng(seed, id, base + Stage::jpeg);
        p.jpeg.quality = rng.uniform_int(o.jpeg.quality.min, o.jpeg.quality.max);
        p.jpeg.applied = p.jpeg.quality < 100;
    }
    return p;
}

ImageBuffer clamp_255(ImageBuffer img) {
    for (auto& v : img.data()) v = std::clamp(v, 0.0, 255.0);
    return img;
}

ImageBuffer add_noise(const ImageBuffer& img, const NoiseParams& p) {
    KeyedRng rng(p.noise_seed);
    ImageBuffer out = img;
    const int c = img.channels();
    const std::size_t pixels = static_cast<std::size_t>(img.width()) * img.height();
    auto data = out.data();
    constexpr double levels = 256.0;
    if (p.gray || c == 1) {
        const ImageBuffer luma = to_luma(img);
        const auto y = luma.data();
        for (std::size_t i = 0; i < pixels; ++i) {
            double n;
            if (p.poisson) {
                const double v = std::clamp(y[i], 0.0, 255.0);
                n = (rng.poisson(v / 255.0 * levels) / levels * 255.0 - v) * p.strength;
            } else {
                n = p.strength * rng.normal();
            }
            for (int k = 0; k < c; ++k) data[i * c + k] += n;
        }
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (p.poisson) {
                const double v = std::clamp(data[i], 0.0, 255.0);
                data[i] += (rng.poisson(v / 255.0 * levels) / levels * 255.0 - v) * p.strength;
            } else {
                data[i] += p.strength * rng.normal();
            }
        }
    }
    return clamp_255(std::move(out));
}

ImageBuffer resize_to(const ImageBuffer& img, int w, int h, ResizeMode mode) {
    switch (mode) {
        case ResizeMode::bicubic: return resample(img, w, h, ResampleFilter::bicubic, false);
        case ResizeMode::bilinear: return resample(img, w, h, ResampleFilter::triangle, false);
        case ResizeMode::area: return resample(img, w, h, ResampleFilter::box, true);
    }
    return img;
}

ImageBuffer apply_order(ImageBuffer img, const OrderParams& p) {
    if (p.blur.applied) {
        const auto k = gaussian_kernel(p.blur.kernel_size, p.blur.sigma_x, p.blur.sigma_y, p.blur.rotation);
        img = filter2d(img, k, p.blur.kernel_size, BorderMode::reflect101);
    }
    if (p.resize.applied) {
        img = clamp_255(resize_to(img, p.resize.width, p.resize.height, p.resize.mode));
    }
    if (p.noise.applied) {
        img = add_noise(img, p.noise);
    }
    if (p.jpeg.applied) {
        img = jpeg_roundtrip(quantize_8bit(img), p.jpeg.quality);
    }
    return img;
}

// JSON helpers for config parsing: read a field when present.
template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void get_range(const json& j, const char* key, RealRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + " must be a [min, max] pair");
    r = {a[0].get<double>(), a[1].get<double>()};
}

void get_range(const json& j, const char* key, IntRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + " must be a [min, max] pair");
    r = {a[0].get<int>(), a[1].get<int>()};
}

void read_order(const json& j, OrderConfig& o) {
    get_if(j, "enabled", o.enabled);
    if (j.contains("blur")) {
        const auto& b = j["blur"];
        get_if(b, "probability", o.blur.probability);
        get_range(b, "kernel_size", o.blur.kernel_size);
        get_range(b, "sigma", o.blur.sigma);
        get_if(b, "anisotropic_probability", o.blur.anisotropic_probability);
        get_range(b, "rotation", o.blur.rotation);
    }
    if (j.contains("resize")) {
        const auto& r = j["resize"];
        get_range(r, "scale", o.resize.scale);
        if (r.contains("modes")) {
            o.resize.modes.clear();
            for (const auto& m : r["modes"]) o.resize.modes.push_back(parse_resize_mode(m.get<std::string>()));
        }
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        get_if(n, "gaussian_probability", o.noise.gaussian_probability);
        get_range(n, "gaussian_sigma", o.noise.gaussian_sigma);
        get_range(n, "poisson_scale", o.noise.poisson_scale);
        get_if(n, "gray_probability", o.noise.gray_probability);
    }
    if (j.contains("jpeg")) get_range(j["jpeg"], "quality", o.jpeg.quality);
}

ojson write_order(const OrderConfig& o) {
    ojson modes = ojson::array();
    for (auto m : o.resize.modes) modes.push_back(to_string(m));
    return ojson{
        {"enabled", o.enabled},
        {"blur",
         {{"probability", o.blur.probability},
          {"kernel_size", {o.blur.kernel_size.min, o.blur.kernel_size.max}},
          {"sigma", {o.blur.sigma.min, o.blur.sigma.max}},
          {"anisotropic_probability", o.blur.anisotropic_probability},
          {"rotation", {o.blur.rotation.min, o.blur.rotation.max}}}},
        {"resize", {{"scale", {o.resize.scale.min, o.resize.scale.max}}, {"modes", modes}}},
        {"noise",
         {{"gaussian_probability", o.noise.gaussian_probability},
          {"gaussian_sigma", {o.noise.gaussian_sigma.min, o.noise.gaussian_sigma.max}},
          {"poisson_scale", {o.noise.poisson_scale.min, o.noise.poisson_scale.max}},
          {"gray_probability", o.noise.gray_probability}}},
        {"jpeg", {{"quality", {o.jpeg.quality.min, o.jpeg.quality.max}}}},
    };
}

ojson order_params_json(const OrderParams& p) {
    return ojson{
        {"blur",
         {{"applied", p.blur.applied},
          {"kernel_size", p.blur.kernel_size},
          {"sigma_x", p.blur.sigma_x},
          {"sigma_y", p.blur.sigma_y},
          {"rotation", p.blur.rotation}}},
        {"resize",
         {{"applied", p.resize.applied},
          {"scale", p.resize.scale},
          {"mode", to_string(p.resize.mode)},
          {"width", p.resize.width},
          {"height", p.resize.height}}},
        {"noise",
         {{"applied", p.noise.applied},
          {"kind", p.noise.poisson ? "poisson" : "gaussian"},
          {"strength", p.noise.strength},
          {"gray", p.noise.gray},
          {"noise_seed", p.noise.noise_seed}}},
        {"jpeg", {{"applied", p.jpeg.applied}, {"quality", p.jpeg.quality}}},
    };
}

OrderParams order_params_from(const json& j) {
    OrderParams p;
    const auto& b = j.at("blur");
    p.blur = {b.at("applied").get<bool>(), b.at("kernel_size").get<int>(), b.at("sigma_x").get<double>(),
              b.at("sigma_y").get<double>(), b.at("rotation").get<double>()};
    const auto& r = j.at("resize");
    p.resize = {r.at("applied").get<bool>(), r.at("scale").get<double>(),
                parse_resize_mode(r.at("mode").get<std::string>()), r.at("width").get<int>(),
                r.at("height").get<int>()};
    const auto& n = j.at("noise");
    p.noise = {n.at("applied").get<bool>(), n.at("kind").get<std::string>() == "poisson",
               n.at("strength").get<double>(), n.at("gray").get<bool>(), n.at("noise_seed").get<std::uint64_t>()};
    const auto& q = j.at("jpeg");
    p.jpeg = {q.at("applied").get<bool>(), q.at("quality").get<int>()};
    return p;
}

ojson params_json(const DegradationParams& p) {
    return ojson{
        {"first", order_params_json(p.first)},
        {"second", order_params_json(p.second)},
        {"sinc", {{"applied", p.sinc.applied}, {"kernel_size", p.sinc.kernel_size}, {"cutoff", p.sinc.cutoff}}},
        {"output_size", p.output_size},
    };
}

DegradationParams params_from(const json& j) {
    DegradationParams p;
    p.first = order_params_from(j.at("first"));
    p.second = order_params_from(j.at("second"));
    const auto& s = j.at("sinc");
    p.sinc = {s.at("applied").get<bool>(), s.at("kernel_size").get<int>(), s.at("cutoff").get<double>()};
    p.output_size = j.at("output_size").get<int>();
    return p;
}

}  // namespace

std::string_view to_string(ResizeMode m) {
    switch (m) {
        case ResizeMode::bicubic: return "bicubic";
        case ResizeMode::bilinear: return "bilinear";
        case ResizeMode::area: return "area";
    }
    return "bicubic";
}

ResizeMode parse_resize_mode(std::string_view s) {
    if (s == "bicubic") return ResizeMode::bicubic;
    if (s == "bilinear") return ResizeMode::bilinear;
    if (s == "area") return ResizeMode::area;
    throw ConfigError("unknown resize mode '" + std::string(s) + "'");
}

void DegradationConfig::validate() const {
    if (input_size < 16) throw ConfigError("degradation input_size must be at least 16");
    validate_order(first, "first");
    validate_order(second, "second");
    check_prob(final_stage.sinc_probability, "final.sinc_probability");
    check_kernel(final_stage.sinc_kernel_size, "final.sinc_kernel_size");
    check_range(final_stage.sinc_cutoff, "final.sinc_cutoff", 1e-6);
    if (final_stage.output_size < 8) throw ConfigError("final.output_size must be at least 8");
}

DegradationConfig DegradationConfig::defaults() {
    DegradationConfig c;
    c.second.blur.probability = 0.8;
    c.second.blur.sigma = {0.2, 1.5};
    c.second.resize.scale = {0.3, 1.2};
    c.second.noise.gaussian_sigma = {1.0, 25.0};
    c.second.noise.poisson_scale = {0.05, 2.5};
    return c;
}

DegradationConfig DegradationConfig::identity() {
    DegradationConfig c;
    for (OrderConfig* o : {&c.first, &c.second}) {
        o->blur.sigma = {0.0, 0.0};
        o->resize.scale = {1.0, 1.0};
        o->noise.gaussian_sigma = {0.0, 0.0};
        o->noise.poisson_scale = {0.0, 0.0};
        o->jpeg.quality = {100, 100};
    }
    c.final_stage.sinc_probability = 0.0;
    return c;
}

DegradationConfig parse_degradation_config(std::string_view json_text, const DegradationConfig& base) {
    DegradationConfig c = base;
    try {
        const json j = json::parse(json_text);
        if (!j.is_object()) throw ConfigError("degradation config must be a JSON object");
        get_if(j, "seed", c.seed);
        get_if(j, "input_size", c.input_size);
        if (j.contains("first")) read_order(j["first"], c.first);
        if (j.contains("second")) read_order(j["second"], c.second);
        if (j.contains("final")) {
            const auto& f = j["final"];
            get_if(f, "sinc_probability", c.final_stage.sinc_probability);
            get_range(f, "sinc_kernel_size", c.final_stage.sinc_kernel_size);
            get_range(f, "sinc_cutoff", c.final_stage.sinc_cutoff);
            get_if(f, "output_size", c.final_stage.output_size);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("degradation config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string degradation_config_to_json(const DegradationConfig& c) {
    const ojson j{
        {"seed", c.seed},
        {"input_size", c.input_size},
        {"first", write_order(c.first)},
        {"second", write_order(c.second)},
        {"final",
         {{"sinc_probability", c.final_stage.sinc_probability},
          {"sinc_kernel_size", {c.final_stage.sinc_kernel_size.min, c.final_stage.sinc_kernel_size.max}},
          {"sinc_cutoff", {c.final_stage.sinc_cutoff.min, c.final_stage.sinc_cutoff.max}},
          {"output_size", c.final_stage.output_size}}},
    };
    return j.dump(2);
}

std::vector<double> gaussian_kernel(int ksize, double sigma_x, double sigma_y, double rotation) {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double vx = sigma_x * sigma_x, vy = sigma_y * sigma_y;
    // Sigma = R diag(vx, vy) R^T; inverse via the rotated reciprocal variances.
    const double a = c * c / vx + s * s / vy;
    const double b = c * s * (1.0 / vx - 1.0 / vy);
    const double d = s * s / vx + c * c / vy;
    const int r = ksize / 2;
    std::vector<double> k(static_cast<std::size_t>(ksize) * ksize);
    double total = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double q = a * x * x + 2.0 * b * x * y + d * y * y;
            const double v = std::exp(-0.5 * q);
            k[static_cast<std::size_t>(y + r) * ksize + (x + r)] = v;
            total += v;
        }
    }
    for (auto& v : k) v /= total;
    return k;
}

std::vector<double> sinc_kernel(int ksize, double cutoff) {
    const int r = ksize / 2;
    std::vector<double> k(static_cast<std::size_t>(ksize) * ksize);
    double total = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double dist = std::hypot(double(x), double(y));
            const double v = dist == 0.0 ? cutoff * cutoff / (4.0 * std::numbers::pi)
                                         : cutoff * std::cyl_bessel_j(1.0, cutoff * dist) / (2.0 * std::numbers::pi * dist);
            k[static_cast<std::size_t>(y + r) * ksize + (x + r)] = v;
            total += v;
        }
    }
    for (auto& v : k) v /= total;
    return k;
}

DegradationParams draw_degradation(const DegradationConfig& cfg, const std::string& crop_id, int width, int height) {
    DegradationParams p;
    int w = width, h = height;
    p.first = draw_order(cfg.first, cfg.seed, crop_id, 0, w, h);
    p.second = draw_order(cfg.second, cfg.seed, crop_id, kStagesPerOrder, w, h);
    KeyedRng rng(cfg.seed, crop_id, kSincStage);
    p.sinc.applied = rng.bernoulli(cfg.final_stage.sinc_probability);
    p.sinc.kernel_size = draw_odd(rng, cfg.final_stage.sinc_kernel_size);
    p.sinc.cutoff = rng.uniform(cfg.final_stage.sinc_cutoff.min, cfg.final_stage.sinc_cutoff.max);
    p.output_size = cfg.final_stage.output_size;
    return p;
}

ImageBuffer apply_degradation(const ImageBuffer& hq, const DegradationParams& params) {
    ImageBuffer img = apply_order(hq, params.first);
    img = apply_order(std::move(img), params.second);
    if (params.sinc.applied) {
        img = clamp_255(filter2d(img, sinc_kernel(params.sinc.kernel_size, params.sinc.cutoff),
                                 params.sinc.kernel_size, BorderMode::reflect101));
    }
    if (img.width() != params.output_size || img.height() != params.output_size) {
        img = resample(img, params.output_size, params.output_size, ResampleFilter::bicubic, true);
    }
    return quantize_8bit(img);
}

ImageBuffer degrade(const ImageBuffer& hq, const DegradationConfig& cfg, const std::string& crop_id,
                    DegradationParams* drawn) {
    if (hq.width() != cfg.input_size || hq.height() != cfg.input_size) {
        throw std::invalid_argument("degrade: expected a " + std::to_string(cfg.input_size) + "x" +
                                    std::to_string(cfg.input_size) + " input, got " + std::to_string(hq.width()) +
                                    "x" + std::to_string(hq.height()));
    }
    const auto params = draw_degradation(cfg, crop_id, hq.width(), hq.height());
    if (drawn) *drawn = params;
    return apply_degradation(hq, params);
}

std::string params_to_json(const DegradationParams& p) {
    return params_json(p).dump();
}

DegradationParams params_from_json(const std::string& text) {
    try {
        return params_from(json::parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("degradation parameters: ") + e.what());
    }
}

std::vector<PairRecord> build_pairs(const SelectionManifest& manifest, const std::filesystem::path& manifest_dir,
                                    const DegradationConfig& cfg, const std::filesystem::path& out_dir, int workers,
                                    Diagnostics& diag) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "lq");
    std::vector<const ManifestEntry*> items;
    for (const auto& e : manifest.entries) {
        if (!e.hq_path.empty()) items.push_back(&e);
    }
    const std::string codec = codec_identity();
    std::vector<std::optional<PairRecord>> results(items.size());
    std::vector<Diagnostics> local(items.size());
    parallel_for(items.size(), workers, [&](std::size_t i) {
        const auto& e = *items[i];
        const fs::path hq_file = manifest_dir / e.hq_path;
        ImageBuffer hq;
        try {
            hq = read_image(hq_file);
        } catch (const DataError& ex) {
            local[i].warn("skipping " + e.crop_id + ": " + ex.what());
            local[i].count("pairs_skipped");
            return;
        }
        if (hq.width() != cfg.input_size || hq.height() != cfg.input_size) {
            local[i].warn("skipping " + e.crop_id + ": HQ file is not " + std::to_string(cfg.input_size) + " square");
            local[i].count("pairs_skipped");
            return;
        }
        PairRecord rec;
        rec.crop_id = e.crop_id;
        rec.hq_path = hq_file.string();
        rec.lq_path = (fs::path("lq") / fs::path(e.hq_path).filename().replace_extension(".png")).string();
        rec.codec = codec;
        const ImageBuffer lq = degrade(hq, cfg, e.crop_id, &rec.params);
        write_image(out_dir / rec.lq_path, lq);
        results[i] = std::move(rec);
    });

    std::vector<PairRecord> out;
    std::ofstream pairs(out_dir / "pairs.jsonl", std::ios::binary);
    if (!pairs) throw DataError("cannot write " + (out_dir / "pairs.jsonl").string());
    for (std::size_t i = 0; i < items.size(); ++i) {
        diag.merge(local[i]);
        if (!results[i]) continue;
        const auto& r = *results[i];
        const ojson j{{"schema", kPairSchema}, {"crop_id", r.crop_id}, {"hq_path", r.hq_path},
                      {"lq_path", r.lq_path}, {"codec", r.codec},      {"params", params_json(r.params)}};
        pairs << j.dump() << '\n';
        out.push_back(r);
    }
    diag.count("pairs_written", out.size());
    return out;
}

std::vector<PairRecord> load_pair_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pair manifest " + path.string());
    std::vector<PairRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (j.at("schema").get<std::string>() != kPairSchema) throw DataError("unsupported pair schema");
            out.push_back({j.at("crop_id").get<std::string>(), j.at("hq_path").get<std::string>(),
                           j.at("lq_path").get<std::string>(), j.at("codec").get<std::string>(),
                           params_from(j.at("params"))});
        } catch (const json::exception& e) {
            throw DataError(std::string("pair manifest: ") + e.what());
        }
    }
    return out;
}

}  // namespace hqc
