#pragma once

#include <cstdint>
#include <string_view>

namespace coordsem {

enum class Marking : std::uint8_t { Inactive, Update, Active, Completed, Eliminated };

enum class StateMarking : std::uint8_t { Waiting, Pending, Activated, Confirmed, Skipped };

constexpr std::string_view to_string(Marking m) {
    switch (m) {
        case Marking::Inactive: return "Inactive";
        case Marking::Update: return "Update";
        case Marking::Active: return "Active";
        case Marking::Completed: return "Completed";
        case Marking::Eliminated: return "Eliminated";
    }
    return "?";
}

constexpr std::string_view to_string(StateMarking m) {
    switch (m) {
        case StateMarking::Waiting: return "Waiting";
        case StateMarking::Pending: return "Pending";
        case StateMarking::Activated: return "Activated";
        case StateMarking::Confirmed: return "Confirmed";
        case StateMarking::Skipped: return "Skipped";
    }
    return "?";
}

}  // namespace coordsem
