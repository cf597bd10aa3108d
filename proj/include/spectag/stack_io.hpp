#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "spectag/errors.hpp"
#include "spectag/image.hpp"
#include "spectag/png_io.hpp"

namespace spectag {

namespace fs = std::filesystem;

// Fixed class color table for ground-truth palettes and overlays.
inline pngio::Rgb class_color(int cls) {
    static const std::vector<pngio::Rgb> table = {
        {170, 68, 57},   // liver: dark red
        {96, 133, 189},  // spleen: steel blue
        {221, 187, 68},  // gallbladder: ochre
        {114, 175, 120}, // diaphragm: green
        {201, 123, 177}, // intestine: pink
        {145, 108, 63},  // abdominal wall: brown
        {84, 189, 195},  // teal
        {230, 140, 80},  // orange
    };
    if (cls < 0) return {0, 0, 0};
    if (cls < static_cast<int>(table.size())) return table[cls];
    // distinct-ish fallback for larger class lists
    const int k = cls - static_cast<int>(table.size());
    return {static_cast<uint8_t>(60 + (k * 97) % 180), static_cast<uint8_t>(60 + (k * 57) % 180),
            static_cast<uint8_t>(60 + (k * 37) % 180)};
}

constexpr uint8_t kUnlabeledIndex = 255;

inline std::string channel_file_name(int index, double wavelength_nm) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "ch%d_%gnm.png", index, wavelength_nm);
    return buf;
}

// Writes a stack directory: one 16-bit grayscale PNG per channel plus a
// stack.json sidecar listing wavelengths, FWHM and channel order.
inline void write_stack(const fs::path& dir, const ChannelStack& stack) {
    stack.validate("write_stack");
    fs::create_directories(dir);
    nlohmann::json channels = nlohmann::json::array();
    for (int c = 0; c < stack.channel_count(); ++c) {
        const std::string name = channel_file_name(c, stack.wavelengths[c]);
        pngio::write_gray16((dir / name).string(), stack.channels[c]);
        channels.push_back({{"file", name},
                            {"wavelength_nm", stack.wavelengths[c]},
                            {"fwhm_nm", stack.fwhm[c]}});
    }
    nlohmann::json j;
    j["format"] = "spectag-stack/1";
    j["width"] = stack.width;
    j["height"] = stack.height;
    j["channels"] = std::move(channels);
    std::ofstream out(dir / "stack.json");
    if (!out) throw DataError("write_stack: cannot open " + (dir / "stack.json").string());
    out << j.dump(1) << "\n";
}

inline ChannelStack read_stack(const fs::path& dir) {
    const fs::path sidecar = dir / "stack.json";
    std::ifstream in(sidecar);
    if (!in) throw DataError("read_stack: cannot open " + sidecar.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("read_stack: " + sidecar.string() + ": " + e.what());
    }
    ChannelStack stack;
    stack.width = j.at("width").get<int>();
    stack.height = j.at("height").get<int>();
    for (const auto& cj : j.at("channels")) {
        stack.wavelengths.push_back(cj.at("wavelength_nm").get<double>());
        stack.fwhm.push_back(cj.at("fwhm_nm").get<double>());
        Grid g = pngio::read_gray16((dir / cj.at("file").get<std::string>()).string());
        if (g.width != stack.width || g.height != stack.height)
            throw DataError("read_stack: channel dimensions disagree with sidecar in " +
                            dir.string());
        stack.channels.push_back(std::move(g));
    }
    stack.validate("read_stack " + dir.string());
    return stack;
}

// Ground truth as an 8-bit indexed PNG; palette entries carry class colors,
// index 255 is unlabeled.
inline void write_ground_truth(const fs::path& path, const GroundTruth& gt, int n_classes) {
    std::vector<uint8_t> indices(gt.labels.size());
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const int l = gt.labels[i];
        indices[i] = l >= 0 && l < n_classes ? static_cast<uint8_t>(l) : kUnlabeledIndex;
    }
    std::vector<pngio::Rgb> palette(256, {0, 0, 0});
    for (int c = 0; c < n_classes && c < 255; ++c) palette[c] = class_color(c);
    palette[kUnlabeledIndex] = {32, 32, 32};
    pngio::write_indexed8(path.string(), gt.width, gt.height, indices, palette);
}

inline GroundTruth read_ground_truth(const fs::path& path) {
    const pngio::Indexed8 img = pngio::read_indexed8(path.string());
    GroundTruth gt(img.width, img.height);
    for (size_t i = 0; i < img.indices.size(); ++i)
        gt.labels[i] = img.indices[i] == kUnlabeledIndex ? kUnlabeled : img.indices[i];
    return gt;
}

// labels.json: {"0": "liver", ...}
inline void write_labels_json(const fs::path& path, const std::vector<std::string>& classes) {
    nlohmann::json j = nlohmann::json::object();
    for (size_t c = 0; c < classes.size(); ++c) j[std::to_string(c)] = classes[c];
    std::ofstream out(path);
    if (!out) throw DataError("write_labels_json: cannot open " + path.string());
    out << j.dump(1) << "\n";
}

inline std::vector<std::string> read_labels_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_labels_json: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("read_labels_json: " + path.string() + ": " + e.what());
    }
    std::map<int, std::string> by_id;
    for (auto it = j.begin(); it != j.end(); ++it) by_id[std::stoi(it.key())] = it.value();
    std::vector<std::string> classes;
    for (const auto& [id, name] : by_id) {
        if (id != static_cast<int>(classes.size()))
            throw DataError("read_labels_json: non-contiguous class ids in " + path.string());
        classes.push_back(name);
    }
    return classes;
}

// Calibration pair stored as dark/ and white/ stack directories.
inline void write_calibration(const fs::path& dir, const CalibrationPair& calib) {
    write_stack(dir / "dark", calib.dark);
    write_stack(dir / "white", calib.white);
}

inline CalibrationPair read_calibration(const fs::path& dark_dir, const fs::path& white_dir) {
    CalibrationPair calib;
    calib.dark = read_stack(dark_dir);
    calib.white = read_stack(white_dir);
    calib.validate();
    return calib;
}

} // namespace spectag
