#pragma once

#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

/// One rectified stereo pair. Intensities are grayscale in [0, 1].
struct Frame {
  int index = 0;
  double timestamp = 0.0;
  GrayImage left;
  GrayImage right;
  Pose pose;  ///< camera-to-world of the left camera
  CameraModel camera;
};

}  // namespace tstereo
