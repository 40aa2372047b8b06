#pragma once

#include "iplan/core/types.hpp"

#include <Eigen/Core>

namespace iplan {

// Fixed-length prefix encoding of a TypeCount: one segment of length q_k*
// per type, the first q_k entries of segment k set to one.
using TypeBits = Eigen::VectorXf;

TypeBits encode_type_bits(const TypeCount& q, const RoomTypeRegistry& reg);

// Counts entries >= 0.5 per segment, so sigmoid outputs decode directly.
TypeCount decode_type_bits(const Eigen::Ref<const Eigen::VectorXf>& v, const RoomTypeRegistry& reg);

} // namespace iplan
