#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace argmine {

// Sentence-level coding scheme: concept (claim/argument) x stance (for/against),
// plus the no-stance class.
enum class Label : std::size_t {
    argument_for = 0,
    argument_against = 1,
    claim_for = 2,
    claim_against = 3,
    no_stance = 4,
};

inline constexpr std::size_t kLabelCount = 5;

inline constexpr std::array<Label, kLabelCount> kAllLabels = {
    Label::argument_for, Label::argument_against, Label::claim_for,
    Label::claim_against, Label::no_stance};

constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }

std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);

constexpr bool is_stance(Label l) { return l != Label::no_stance; }
constexpr bool is_claim(Label l) { return l == Label::claim_for || l == Label::claim_against; }
constexpr bool is_argument(Label l) {
    return l == Label::argument_for || l == Label::argument_against;
}

enum class Stance : std::size_t { pro = 0, contra = 1, neutral = 2 };

inline constexpr std::size_t kStanceCount = 3;

std::string_view to_string(Stance s);

constexpr Stance stance_of(Label l) {
    switch (l) {
        case Label::argument_for:
        case Label::claim_for:
            return Stance::pro;
        case Label::argument_against:
        case Label::claim_against:
            return Stance::contra;
        case Label::no_stance:
            break;
    }
    return Stance::neutral;
}

// for <-> against with the concept kept; no_stance is a fixed point.
constexpr Label flip_stance(Label l) {
    switch (l) {
        case Label::argument_for: return Label::argument_against;
        case Label::argument_against: return Label::argument_for;
        case Label::claim_for: return Label::claim_against;
        case Label::claim_against: return Label::claim_for;
        case Label::no_stance: break;
    }
    return Label::no_stance;
}

}  // namespace argmine
