#ifndef PEDFLOW_CORE_HPP
#define PEDFLOW_CORE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pedflow {

// Lattice and clock constants. One cell is 0.4 m x 0.4 m; one step is 0.33 s,
// so a straight move is 1.21 m/s and a diagonal one (booked at 0.56 m) 1.70 m/s.
inline constexpr double kCellSizeM = 0.4;
inline constexpr double kStepSeconds = 0.33;
inline constexpr double kStraightStepM = 0.4;
inline constexpr double kDiagonalStepM = 0.56;
inline constexpr double kCellAreaM2 = kCellSizeM * kCellSizeM;

struct CellIndex {
    int row = 0;
    int col = 0;

    bool operator==(const CellIndex&) const = default;
};

// Continuous point in metres. x grows with columns, y with rows.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

inline Vec2 cell_center(CellIndex c) {
    return {(c.col + 0.5) * kCellSizeM, (c.row + 0.5) * kCellSizeM};
}

// The nine actions of the model: eight Moore moves plus standing still (X).
// The declaration order is the canonical sampling order; do not reorder.
enum class Action : std::uint8_t { N, NE, E, SE, S, SW, W, NW, X };

inline constexpr std::array<Action, 9> kActionOrder = {
    Action::N, Action::NE, Action::E, Action::SE, Action::S,
    Action::SW, Action::W, Action::NW, Action::X};

struct ActionOffset {
    int drow;
    int dcol;
};

inline constexpr std::array<ActionOffset, 9> kActionOffsets = {{
    {-1, 0},   // N
    {-1, 1},   // NE
    {0, 1},    // E
    {1, 1},    // SE
    {1, 0},    // S
    {1, -1},   // SW
    {0, -1},   // W
    {-1, -1},  // NW
    {0, 0},    // X
}};

inline constexpr ActionOffset action_offset(Action a) {
    return kActionOffsets[static_cast<std::size_t>(a)];
}

inline constexpr bool is_diagonal(Action a) {
    const auto off = action_offset(a);
    return off.drow != 0 && off.dcol != 0;
}

inline constexpr bool is_move(Action a) { return a != Action::X; }

// Compass slot (0..7) for the eight move actions; used by the inertia term.
inline constexpr int compass_index(Action a) {
    return static_cast<int>(a);
}

inline const char* action_name(Action a) {
    static constexpr std::array<const char*, 9> names = {
        "N", "NE", "E", "SE", "S", "SW", "W", "NW", "X"};
    return names[static_cast<std::size_t>(a)];
}

inline bool parse_action(const std::string& s, Action& out) {
    for (Action a : kActionOrder) {
        if (s == action_name(a)) {
            out = a;
            return true;
        }
    }
    return false;
}

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Scenario or configuration input rejected before a run starts.
class ValidationError : public Error {
  public:
    using Error::Error;
};

// Malformed trajectory or dataset content discovered during analysis.
class DataError : public Error {
  public:
    using Error::Error;
};

// An operation called outside its mathematical domain (empty sample, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

}  // namespace pedflow

#endif
