#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tstereo/fusion.hpp"
#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

namespace fs = std::filesystem;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
/// Throws IoError.
void write_file_atomic(const fs::path& path, std::string_view bytes);
/// Whole-file read. Throws IoError.
std::string read_file(const fs::path& path);

/// Grayscale PFM ("Pf"), little-endian, rows stored bottom to top. Values are
/// narrowed to float32.
void write_pfm(const fs::path& path, const Image<double>& map);
/// Accepts either endianness (scale sign). Throws ParseError with a byte
/// offset for malformed files, including color ("PF") files.
Image<double> read_pfm(const fs::path& path);

/// KITTI disparity PNG: 16-bit gray, value = round(d * 256), 0 = invalid.
/// Throws DomainError for valid disparities outside [0, 256).
void write_disp_png16(const fs::path& path, const DisparityMap& disparity, const Mask& valid);
/// Throws ParseError unless the file is a 16-bit single-channel PNG.
SemiDenseDisparity read_disp_png16(const fs::path& path);

/// 16-bit gray PNG of intensities in [0, 1] (clamped).
void write_image_png16(const fs::path& path, const GrayImage& image);
/// 8- or 16-bit PNG (gray or RGB) or binary PGM, scaled to [0, 1]. Color is
/// converted with luma weights 0.299, 0.587, 0.114.
GrayImage read_image(const fs::path& path);

/// Binary 8-bit PGM holding 0 or 255.
void write_mask_pgm(const fs::path& path, const Mask& mask);
/// Any non-zero sample reads as 1.
Mask read_mask_pgm(const fs::path& path);

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// One pose per line: TUM "t tx ty tz qx qy qz qw" or KITTI 3x4 row-major
/// matrix (timestamp = line order). The format is fixed by the first data
/// line. '#' comments and blank lines are skipped. KITTI rotations within
/// 1e-3 of orthonormal are projected onto SO(3). Throws ParseError naming the
/// line.
std::vector<StampedPose> read_poses(const fs::path& path);
/// TUM format with round-trip precision.
void write_poses_tum(const fs::path& path, const std::vector<StampedPose>& poses);

/// key = value file with fx, fy, cx, cy, baseline, width, height.
CameraModel read_camera(const fs::path& path);
void write_camera(const fs::path& path, const CameraModel& cam);

/// Binary gate weights: "TCSW", u32 version (1), u32 F, then W_z, W_r, W_q
/// (F x 2F each, row-major) and b_z, b_r, b_q, all float32 little-endian.
void write_fusion_weights(const fs::path& path, const FusionWeights& weights);
FusionWeights read_fusion_weights(const fs::path& path);

/// "000042" style frame stem.
std::string frame_stem(int index);

}  // namespace tstereo
