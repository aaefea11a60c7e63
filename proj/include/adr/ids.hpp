#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace adr {

/// Opaque identifier. The tag keeps nodes, edges and forest vertices apart
/// at the type level while all three share one numbering space.
template <class Tag>
struct Id {
  std::uint64_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint64_t v) : value(v) {}

  constexpr bool valid() const { return value != 0; }
  constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

struct NodeTag {};
struct EdgeTag {};
struct VertexTag {};

using NodeId = Id<NodeTag>;
using EdgeId = Id<EdgeTag>;
using VertexId = Id<VertexTag>;

/// Monotone source of fresh identifiers. Every value handed out is strictly
/// greater than anything issued or observed before, so freshness can be
/// checked by comparison alone.
class IdAllocator {
 public:
  IdAllocator() = default;
  explicit IdAllocator(std::uint64_t next) : next_(next == 0 ? 1 : next) {}

  NodeId node() { return NodeId(next_++); }
  EdgeId edge() { return EdgeId(next_++); }
  VertexId vertex() { return VertexId(next_++); }

  /// Bumps the counter past an externally created id.
  void observe(std::uint64_t used) {
    if (used >= next_) next_ = used + 1;
  }
  template <class Tag>
  void observe(Id<Tag> id) { observe(id.value); }

  std::uint64_t peek() const { return next_; }

  bool operator==(const IdAllocator&) const = default;

 private:
  std::uint64_t next_ = 1;
};

}  // namespace adr

template <class Tag>
struct std::hash<adr::Id<Tag>> {
  std::size_t operator()(adr::Id<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
