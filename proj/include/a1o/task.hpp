// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace a1o {

enum class Task : std::uint8_t { Detection, Landmarks, Visibility, Pose, Gender, Smile, Age, Identity };

inline constexpr std::array<Task, 8> kAllTasks{Task::Detection, Task::Landmarks, Task::Visibility, Task::Pose,
                                               Task::Gender,    Task::Smile,     Task::Age,        Task::Identity};

std::string_view task_name(Task t);
std::optional<Task> task_from_name(std::string_view name);

/// Tasks read from the fused low-level features.
bool is_subject_independent(Task t);

/// Small bitset over the eight tasks.
class TaskSet {
public:
    constexpr TaskSet() = default;
    constexpr TaskSet(std::initializer_list<Task> tasks)
    {
        for (auto t : tasks) insert(t);
    }
    static constexpr TaskSet all() { return TaskSet(0xFF); }

    constexpr void insert(Task t) { bits_ |= bit(t); }
    constexpr void erase(Task t) { bits_ &= static_cast<std::uint8_t>(~bit(t)); }
    constexpr bool contains(Task t) const { return (bits_ & bit(t)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    std::size_t size() const;
    std::vector<Task> list() const;
    /// Comma-separated task names in canonical order.
    std::string to_string() const;

    constexpr TaskSet operator&(TaskSet o) const { return TaskSet(static_cast<std::uint8_t>(bits_ & o.bits_)); }
    constexpr TaskSet operator|(TaskSet o) const { return TaskSet(static_cast<std::uint8_t>(bits_ | o.bits_)); }
    constexpr bool operator==(const TaskSet&) const = default;

private:
    constexpr explicit TaskSet(std::uint8_t bits) : bits_(bits) {}
    static constexpr std::uint8_t bit(Task t) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t)); }
    std::uint8_t bits_ = 0;
};

}  // namespace a1o
