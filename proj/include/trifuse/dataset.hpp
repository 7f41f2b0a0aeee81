#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trifuse/features.hpp"

namespace trifuse {

enum class Task { Classification, Regression };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

/// Either a binary class or a valence-arousal pair in [-1,1]^2.
struct Label {
    Task task = Task::Classification;
    int cls = 0;          // classification
    double valence = 0.0;  // regression
    double arousal = 0.0;

    static Label classification(int y);
    static Label regression(double v, double a);
};

struct ManifestRecord {
    std::string id;
    int fold = 0;  // 1..5
    Label label;
    std::string video_path;  // relative to the manifest's directory
    std::string image_path;
    std::string text_path;
};

struct Manifest {
    std::filesystem::path dir;  // directory the paths resolve against
    std::vector<ManifestRecord> records;

    Task task() const;
};

// JSON Lines, one record per clip:
//   {"id": str, "fold": int, "label": number | [number, number],
//    "video": path, "image": path, "text": path}
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

/// One aligned 64-frame window: 16 video rows, 16 image rows, 4 text rows,
/// plus the clip label.
struct WindowSample {
    FeatureSequence video;  // 16 x d_v
    FeatureSequence image;  // 16 x d_i
    FeatureSequence text;   // 4 x d_t
    Label label;
    std::string clip_id;
};

/// Slices every clip of the manifest into windows. If `fold` is set, only
/// clips of that fold (include=true) or all other folds (include=false) are
/// kept. Feature files of a clip must agree on the frame count.
std::vector<WindowSample> load_windows(const Manifest& m, std::optional<int> fold,
                                       bool include, std::size_t stride = kDefaultStride);

}  // namespace trifuse
