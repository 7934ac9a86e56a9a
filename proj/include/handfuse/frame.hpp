#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "handfuse/geometry.hpp"

namespace handfuse {

// Canonical flat layout, per hand:
//   arm    start xyz, end xyz, angle                          ->   7
//   palm   position xyz, velocity xyz, normal xyz,
//          pitch, roll, yaw, palm_normal_angle                ->  13
//   bones  5 fingers x 4 bones x (start xyz, end xyz,
//          width, angle)                                      -> 160
// Two hand blocks (left then right) plus the two presence flags.
inline constexpr int kBonesPerHand = 20;
inline constexpr int kHandBlockSize = 180;
inline constexpr int kFrameValues = 362;
inline constexpr int kLeftPresentIndex = 360;
inline constexpr int kRightPresentIndex = 361;

inline constexpr std::array<const char*, 5> kFingerNames = {
    "thumb", "index", "middle", "ring", "pinky"};
inline constexpr std::array<const char*, 4> kBoneNames = {
    "metacarpal", "proximal", "intermediate", "distal"};

struct BoneRecord {
  Vec3 start;
  Vec3 end;
  double width = 0.0;   // mm, >= 0
  double angle = 0.0;   // radians, [0, pi] or 0 sentinel

  bool operator==(const BoneRecord&) const = default;
};

struct PalmRecord {
  Vec3 position;
  Vec3 velocity;
  Vec3 normal;
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;
  double palm_normal_angle = 0.0;  // [0, pi] or 0 sentinel

  bool operator==(const PalmRecord&) const = default;
};

struct ArmRecord {
  Vec3 start;
  Vec3 end;
  double angle = 0.0;  // [0, pi] or 0 sentinel

  bool operator==(const ArmRecord&) const = default;
};

/// One hand's skeletal state for a single time step. An absent hand
/// (present == 0) is all zeros.
struct HandFrame {
  ArmRecord arm;
  PalmRecord palm;
  std::array<std::array<BoneRecord, 4>, 5> fingers{};  // [finger][bone]
  double present = 0.0;  // {0, 1}

  bool operator==(const HandFrame&) const = default;
};

/// Fixed-layout flattening of a two-hand frame.
using FrameVector = std::array<double, kFrameValues>;

/// Fills every derived angle from the stored positions: arm angle,
/// the 20 bone angles, and the palm-vs-normal angle. All other fields
/// are copied unchanged. Idempotent.
HandFrame derive_hand_features(const HandFrame& raw);

/// Emits the canonical 362-value layout: [left block, right block,
/// left_present, right_present].
FrameVector flatten_frame(const HandFrame& left, const HandFrame& right);

/// Exact inverse of flatten_frame. Throws WrongLength unless the input
/// has exactly 362 values.
std::pair<HandFrame, HandFrame> unflatten_frame(std::span<const double> values);

/// Names of the 362 feature columns, in canonical layout order.
const std::vector<std::string>& feature_column_names();

}  // namespace handfuse
