#include "trifuse/dataset.hpp"

#include <fstream>

#include "json.hpp"

namespace trifuse {

using nlohmann::json;

std::string task_name(Task t) {
    return t == Task::Classification ? "classification" : "regression";
}

Task task_from_name(const std::string& name) {
    if (name == "classification") return Task::Classification;
    if (name == "regression") return Task::Regression;
    throw ConfigError("unknown task: " + name);
}

Label Label::classification(int y) {
    if (y != 0 && y != 1) throw ContractError("class label must be 0 or 1");
    Label l;
    l.task = Task::Classification;
    l.cls = y;
    return l;
}

Label Label::regression(double v, double a) {
    if (v < -1.0 || v > 1.0 || a < -1.0 || a > 1.0)
        throw ContractError("valence/arousal must be in [-1, 1]");
    Label l;
    l.task = Task::Regression;
    l.valence = v;
    l.arousal = a;
    return l;
}

Task Manifest::task() const {
    if (records.empty()) throw ConfigError("empty manifest");
    return records.front().label.task;
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    Manifest m;
    m.dir = path.parent_path();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what(),
                             0);
        }
        ManifestRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.fold = j.at("fold").get<int>();
            const auto& lab = j.at("label");
            if (lab.is_array()) {
                r.label = Label::regression(lab.at(0).get<double>(), lab.at(1).get<double>());
            } else {
                r.label = Label::classification(lab.get<int>());
            }
            r.video_path = j.at("video").get<std::string>();
            r.image_path = j.at("image").get<std::string>();
            r.text_path = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what(),
                             0);
        }
        if (r.fold < 1 || r.fold > 5)
            throw DataError(path.string() + " line " + std::to_string(lineno) +
                            ": fold must be in 1..5");
        m.records.push_back(std::move(r));
    }
    if (m.records.empty()) throw DataError("manifest has no records: " + path.string());
    for (std::size_t i = 1; i < m.records.size(); ++i) {
        if (m.records[i].label.task != m.records[0].label.task)
            throw DataError("manifest mixes classification and regression labels");
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open manifest for writing: " + path.string());
    for (const auto& r : m.records) {
        json j;
        j["id"] = r.id;
        j["fold"] = r.fold;
        if (r.label.task == Task::Classification) {
            j["label"] = r.label.cls;
        } else {
            j["label"] = {r.label.valence, r.label.arousal};
        }
        j["video"] = r.video_path;
        j["image"] = r.image_path;
        j["text"] = r.text_path;
        out << j.dump() << "\n";
    }
}

std::vector<WindowSample> load_windows(const Manifest& m, std::optional<int> fold,
                                       bool include, std::size_t stride) {
    const auto video_idx = uniform_subsample(kWindowFrames, kVideoSamplesPerWindow);
    const auto image_idx = uniform_subsample(kWindowFrames, kImageSamplesPerWindow);
    const auto text_idx = uniform_subsample(kWindowFrames, kTextSamplesPerWindow);

    std::vector<WindowSample> out;
    for (const auto& r : m.records) {
        if (fold && ((r.fold == *fold) != include)) continue;
        const auto video = read_features(m.dir / r.video_path, Modality::Video);
        const auto image = read_features(m.dir / r.image_path, Modality::Image);
        const auto text = read_features(m.dir / r.text_path, Modality::Text);
        if (video.timesteps != image.timesteps || video.timesteps != text.timesteps)
            throw DataError("clip " + r.id + ": streams disagree on frame count");
        for (std::size_t start : window_starts(video.timesteps, kWindowFrames, stride)) {
            WindowSample w;
            w.video = extract_window(video, start, video_idx);
            w.image = extract_window(image, start, image_idx);
            w.text = extract_window(text, start, text_idx);
            w.label = r.label;
            w.clip_id = r.id;
            out.push_back(std::move(w));
        }
    }
    return out;
}

}  // namespace trifuse
