#include "iplan/core/type_bits.hpp"

#include "iplan/core/errors.hpp"

#include <string>

namespace iplan {

TypeBits encode_type_bits(const TypeCount& q, const RoomTypeRegistry& reg)
{
    if (static_cast<int>(q.counts.size()) != reg.K())
        throw ShapeError("type count has " + std::to_string(q.counts.size())
            + " entries, registry has " + std::to_string(reg.K()));
    TypeBits v = TypeBits::Zero(reg.n_c());
    int offset = 0;
    for (int k = 0; k < reg.K(); ++k) {
        const int qk = q.counts[static_cast<std::size_t>(k)];
        const int cap = reg.max_counts[static_cast<std::size_t>(k)];
        if (qk < 0)
            throw DomainError("negative count for '" + reg.names[static_cast<std::size_t>(k)] + "'");
        if (qk > cap)
            throw CountOverflow(reg.names[static_cast<std::size_t>(k)] + ": " + std::to_string(qk)
                + " exceeds max count " + std::to_string(cap));
        v.segment(offset, qk).setOnes();
        offset += cap;
    }
    return v;
}

TypeCount decode_type_bits(const Eigen::Ref<const Eigen::VectorXf>& v, const RoomTypeRegistry& reg)
{
    if (v.size() != reg.n_c())
        throw ShapeError("type bits have length " + std::to_string(v.size()) + ", expected "
            + std::to_string(reg.n_c()));
    TypeCount q{std::vector<int>(static_cast<std::size_t>(reg.K()), 0)};
    int offset = 0;
    for (int k = 0; k < reg.K(); ++k) {
        const int cap = reg.max_counts[static_cast<std::size_t>(k)];
        q.counts[static_cast<std::size_t>(k)] = static_cast<int>((v.segment(offset, cap).array() >= 0.5f).count());
        offset += cap;
    }
    return q;
}

} // namespace iplan
