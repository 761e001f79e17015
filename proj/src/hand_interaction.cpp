#include "proctor/hand_interaction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace proctor {

namespace {

BBox hull(const LandmarkSet& hand) {
  const auto xy = hand.points.leftCols<2>();
  const Eigen::RowVector2d lo = xy.colwise().minCoeff();
  const Eigen::RowVector2d hi = xy.colwise().maxCoeff();
  return BBox(lo.x(), lo.y(), hi.x(), hi.y());
}

}  // namespace

HandObservation HandObservation::from_landmarks(const LandmarkSet& hand) {
  BBox box = hull(hand);
  const Eigen::Vector2d c = bbox_center(box);
  return HandObservation{hand, box, c};
}

InteractionReport min_class_distances(std::span<const HandObservation> hands,
                                      std::span<const DetectionRecord> detections) {
  InteractionReport rep;
  rep.num_hands = static_cast<int>(hands.size());
  rep.num_items = static_cast<int>(detections.size());
  for (const auto& d : detections) {
    const auto c = static_cast<std::size_t>(d.item);
    rep.per_class_confidence[c] = std::max(rep.per_class_confidence[c], d.confidence);
    if (d.camera != Camera::HandCam) continue;
    const Eigen::Vector2d item_center = bbox_center(d.bbox);
    for (const auto& h : hands) {
      const double dist = euclidean_distance(h.center, item_center) / std::numbers::sqrt2;
      auto& slot = rep.per_class_min_distance[c];
      if (!slot || dist < *slot) slot = dist;
    }
  }
  for (const auto& slot : rep.per_class_min_distance)
    if (slot && (!rep.global_min_distance || *slot < *rep.global_min_distance)) rep.global_min_distance = slot;
  return rep;
}

InteractionReport analyze_hand_frame(const FrameRecord& record) {
  std::vector<HandObservation> hands;
  hands.reserve(record.hands.size());
  for (const auto& h : record.hands) hands.push_back(HandObservation::from_landmarks(h));
  return min_class_distances(hands, record.detections);
}

}  // namespace proctor
