#include "handfuse/frame.hpp"

#include "handfuse/errors.hpp"

namespace handfuse {
namespace {

void put_vec3(FrameVector& out, int& i, const Vec3& v) {
  out[i++] = v.x;
  out[i++] = v.y;
  out[i++] = v.z;
}

Vec3 take_vec3(std::span<const double> v, int& i) {
  Vec3 r{v[i], v[i + 1], v[i + 2]};
  i += 3;
  return r;
}

void put_hand(FrameVector& out, int& i, const HandFrame& h) {
  put_vec3(out, i, h.arm.start);
  put_vec3(out, i, h.arm.end);
  out[i++] = h.arm.angle;
  put_vec3(out, i, h.palm.position);
  put_vec3(out, i, h.palm.velocity);
  put_vec3(out, i, h.palm.normal);
  out[i++] = h.palm.pitch;
  out[i++] = h.palm.roll;
  out[i++] = h.palm.yaw;
  out[i++] = h.palm.palm_normal_angle;
  for (const auto& finger : h.fingers) {
    for (const auto& bone : finger) {
      put_vec3(out, i, bone.start);
      put_vec3(out, i, bone.end);
      out[i++] = bone.width;
      out[i++] = bone.angle;
    }
  }
}

HandFrame take_hand(std::span<const double> v, int& i) {
  HandFrame h;
  h.arm.start = take_vec3(v, i);
  h.arm.end = take_vec3(v, i);
  h.arm.angle = v[i++];
  h.palm.position = take_vec3(v, i);
  h.palm.velocity = take_vec3(v, i);
  h.palm.normal = take_vec3(v, i);
  h.palm.pitch = v[i++];
  h.palm.roll = v[i++];
  h.palm.yaw = v[i++];
  h.palm.palm_normal_angle = v[i++];
  for (auto& finger : h.fingers) {
    for (auto& bone : finger) {
      bone.start = take_vec3(v, i);
      bone.end = take_vec3(v, i);
      bone.width = v[i++];
      bone.angle = v[i++];
    }
  }
  return h;
}

}  // namespace

HandFrame derive_hand_features(const HandFrame& raw) {
  HandFrame out = raw;
  out.arm.angle = angle_between(raw.arm.start, raw.arm.end);
  out.palm.palm_normal_angle = angle_between(raw.palm.position, raw.palm.normal);
  for (auto& finger : out.fingers) {
    for (auto& bone : finger) {
      bone.angle = angle_between(bone.start, bone.end);
    }
  }
  return out;
}

FrameVector flatten_frame(const HandFrame& left, const HandFrame& right) {
  FrameVector out{};
  int i = 0;
  put_hand(out, i, left);
  put_hand(out, i, right);
  out[kLeftPresentIndex] = left.present;
  out[kRightPresentIndex] = right.present;
  return out;
}

std::pair<HandFrame, HandFrame> unflatten_frame(std::span<const double> values) {
  if (values.size() != kFrameValues) {
    throw WrongLength("frame vector has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(kFrameValues));
  }
  int i = 0;
  HandFrame left = take_hand(values, i);
  HandFrame right = take_hand(values, i);
  left.present = values[kLeftPresentIndex];
  right.present = values[kRightPresentIndex];
  return {left, right};
}

const std::vector<std::string>& feature_column_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    n.reserve(kFrameValues);
    const char* xyz[3] = {"x", "y", "z"};
    for (const char* side : {"left", "right"}) {
      const std::string s = std::string(side) + "_";
      for (const char* c : xyz) n.push_back(s + "arm_start_" + c);
      for (const char* c : xyz) n.push_back(s + "arm_end_" + c);
      n.push_back(s + "arm_angle");
      for (const char* c : xyz) n.push_back(s + "palm_position_" + c);
      for (const char* c : xyz) n.push_back(s + "palm_velocity_" + c);
      for (const char* c : xyz) n.push_back(s + "palm_normal_" + c);
      n.push_back(s + "palm_pitch");
      n.push_back(s + "palm_roll");
      n.push_back(s + "palm_yaw");
      n.push_back(s + "palm_normal_angle");
      for (const char* finger : kFingerNames) {
        for (const char* bone : kBoneNames) {
          const std::string b = s + finger + "_" + bone + "_";
          for (const char* c : xyz) n.push_back(b + "start_" + c);
          for (const char* c : xyz) n.push_back(b + "end_" + c);
          n.push_back(b + "width");
          n.push_back(b + "angle");
        }
      }
    }
    n.push_back("left_present");
    n.push_back("right_present");
    return n;
  }();
  return names;
}

}  // namespace handfuse
