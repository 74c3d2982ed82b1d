#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>

namespace coordsem {

// Tagged integer so that instance ids, step ids and model indices cannot be mixed up.
template <class Tag>
struct Id {
    static constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t v = none;

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t value) : v(value) {}
    constexpr explicit Id(std::size_t value) : v(static_cast<std::uint32_t>(value)) {}
    constexpr explicit Id(int value) : v(static_cast<std::uint32_t>(value)) {}

    [[nodiscard]] constexpr bool valid() const { return v != none; }
    [[nodiscard]] constexpr std::size_t idx() const { return v; }
    constexpr auto operator<=>(const Id&) const = default;
};

struct TypeTag {};
struct StateTag {};
struct RelTypeTag {};
struct StepTypeTag {};
struct PortTypeTag {};
struct TransTypeTag {};
struct CpTypeTag {};
struct InstanceTag {};
struct RelationTag {};
struct StepTag {};
struct PortTag {};
struct CompTag {};
struct UnitTag {};

using TypeIdx = Id<TypeTag>;
using StateIdx = Id<StateTag>;
using RelTypeIdx = Id<RelTypeTag>;
using StepTypeIdx = Id<StepTypeTag>;
using PortTypeIdx = Id<PortTypeTag>;
using TransTypeIdx = Id<TransTypeTag>;
using CpTypeIdx = Id<CpTypeTag>;

using InstanceId = Id<InstanceTag>;
using RelationId = Id<RelationTag>;
using StepId = Id<StepTag>;
using PortId = Id<PortTag>;
using CompId = Id<CompTag>;
using UnitId = Id<UnitTag>;

}  // namespace coordsem

template <class Tag>
struct std::hash<coordsem::Id<Tag>> {
    std::size_t operator()(const coordsem::Id<Tag>& id) const noexcept { return std::hash<std::uint32_t>{}(id.v); }
};
