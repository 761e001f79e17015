#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "proctor/ingest.hpp"

namespace proctor {

inline Eigen::Vector2d bbox_center(const BBox& b) {
  return {0.5 * (b.x_min() + b.x_max()), 0.5 * (b.y_min() + b.y_max())};
}

template <typename D1, typename D2>
typename D1::Scalar euclidean_distance(const Eigen::MatrixBase<D1>& p1, const Eigen::MatrixBase<D2>& p2) {
  return (p2 - p1).norm();
}

/// A tracked hand reduced to the hull of its landmarks.
struct HandObservation {
  LandmarkSet landmarks;
  BBox bbox;
  Eigen::Vector2d center;

  static HandObservation from_landmarks(const LandmarkSet& hand);
};

struct InteractionReport {
  std::array<double, kNumItemClasses> per_class_confidence{};
  std::array<std::optional<double>, kNumItemClasses> per_class_min_distance{};
  std::optional<double> global_min_distance;
  int num_hands = 0;
  int num_items = 0;
};

/// Per-class minimum hand-to-item center distance, normalized by the frame
/// diagonal. Only hand_cam detections are paired with hands; confidences
/// take the maximum over both cameras.
InteractionReport min_class_distances(std::span<const HandObservation> hands,
                                      std::span<const DetectionRecord> detections);

InteractionReport analyze_hand_frame(const FrameRecord& record);

}  // namespace proctor
