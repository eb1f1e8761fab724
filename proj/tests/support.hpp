#pragma once

#include <lsr/lsr.hpp>

#include <bit>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace lsr::test {

namespace fs = std::filesystem;

/// Fresh, empty scratch directory under the build tree.
inline fs::path scratch(const std::string& name)
{
    const fs::path p = fs::path(LSR_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs the CLI with `args`; stdout and stderr go to files under `log_dir`.
inline int run_cli(const std::string& args, const fs::path& log_dir)
{
    fs::create_directories(log_dir);
    const std::string cmd = std::string(LSR_CLI_PATH) + " " + args + " >" + (log_dir / "stdout.txt").string() +
                            " 2>" + (log_dir / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) {
        return -1;
    }
    return WEXITSTATUS(rc);
}

inline SyntheticFaceConfig synth_config(std::size_t count = 30, std::uint64_t seed = 7)
{
    SyntheticFaceConfig cfg;
    cfg.count = count;
    cfg.rng_seed = seed;
    return cfg;
}

inline std::vector<SyntheticFace> faces(const SyntheticFaceConfig& cfg, std::size_t first, std::size_t n)
{
    std::vector<SyntheticFace> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = synthesize_face(cfg, first + i); });
    return out;
}

inline std::vector<TrainingSample> samples_of(const std::vector<SyntheticFace>& fs)
{
    std::vector<TrainingSample> out;
    for (const auto& f : fs) {
        out.push_back({std::make_shared<const GrayImage>(f.image), f.bbox, f.shape, 1});
    }
    return out;
}

/// Smaller forests and a heavier ridge than the library defaults; fits the
/// synthetic faces without memorizing them and runs quickly on one core.
inline TrainConfig desk_config(int stages = 5)
{
    TrainConfig cfg;
    cfg.stages = stages;
    cfg.trees_per_landmark = 3;
    cfg.tree_depth = 3;
    cfg.split_candidates = 100;
    cfg.split_sample_cap = 128;
    cfg.initial_perturbations = 5;
    cfg.mu = 300.0;
    cfg.pupils = ibug68::pupils();
    return cfg;
}

/// Tiny configuration for tests that only need a model to exist.
inline TrainConfig tiny_config()
{
    TrainConfig cfg = desk_config(2);
    cfg.trees_per_landmark = 2;
    cfg.tree_depth = 2;
    cfg.split_candidates = 20;
    cfg.pixel_pool = 40;
    cfg.split_sample_cap = 64;
    cfg.initial_perturbations = 2;
    return cfg;
}

inline bool stages_monotone(const std::vector<StageReport>& stages)
{
    for (std::size_t t = 0; t < stages.size(); ++t) {
        if (!(stages[t].error_after <= stages[t].error_before)) {
            return false;
        }
        if (t > 0 && !(stages[t].error_after <= stages[t - 1].error_after)) {
            return false;
        }
    }
    return true;
}

/// Random nondegenerate homography close enough to identity that points in
/// [-1,1]^2 stay in front of the camera.
inline std::array<double, 9> random_homography(std::mt19937_64& rng)
{
    for (;;) {
        std::array<double, 9> h{};
        for (auto& v : h) {
            v = 0.5 * standard_normal(rng);
        }
        h[0] += 1.5;
        h[4] += 1.5;
        h[6] *= 0.3;
        h[7] *= 0.3;
        h[8] = 1.0;
        const double det = h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
                           h[2] * (h[3] * h[7] - h[4] * h[6]);
        if (std::abs(det) > 0.2) {
            return h;
        }
    }
}

inline Point2 apply_homography(const std::array<double, 9>& h, Point2 p)
{
    const double w = h[6] * p.x + h[7] * p.y + h[8];
    return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

} // namespace lsr::test
