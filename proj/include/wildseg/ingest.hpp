#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wildseg/image.hpp"

namespace wildseg::ingest {

// Largest possible Euclidean distance between two RGB triples, 255*sqrt(3).
inline constexpr double kMaxRgbDistance = 441.6729559300637;

// Files in `directory` whose names match `pattern` (exactly one '*', which
// must cover a run of digits, e.g. "frame_*.png"), ordered by that number.
std::vector<std::filesystem::path> list_numbered(const std::filesystem::path& directory,
                                                 const std::string& pattern);

// Errors: NoFrames, InconsistentDims, DecodeError(path).
FrameSequence load_frame_sequence(const std::filesystem::path& directory, const std::string& pattern,
                                  double frame_rate);

// Per-pixel, per-channel lower median over frames. Needs >= 3 frames.
Frame median_background_model(const FrameSequence& seq);

// mask = 1 iff RGB distance to the background pixel is strictly greater than tau_bg.
ForegroundMask foreground_mask(const Frame& frame, const Frame& background, double tau_bg);
std::vector<ForegroundMask> subtract_background(const FrameSequence& seq, const Frame& background, double tau_bg);

// mask = alpha >= threshold. Gray images use the gray value, images with an
// alpha channel use alpha, RGB images use channel 0.
ForegroundMask load_matte(const std::filesystem::path& path, int threshold);
std::vector<ForegroundMask> load_matte_sequence(const std::filesystem::path& directory, const std::string& pattern,
                                                int threshold, std::optional<std::size_t> expected_count = {});

// Background pixels become (0,0,0); foreground pixels are copied unchanged.
Frame apply_mask(const Frame& frame, const ForegroundMask& mask);

// Drops 4-connected foreground components with fewer than min_blob pixels.
ForegroundMask remove_small_blobs(const ForegroundMask& mask, int min_blob);

// 0/255 grayscale for caching.
void write_mask(const std::filesystem::path& path, const ForegroundMask& mask);

}  // namespace wildseg::ingest
