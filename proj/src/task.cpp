// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/task.hpp"

namespace a1o {

namespace {
constexpr std::array<std::string_view, 8> kNames{"detection", "landmarks", "visibility", "pose",
                                                 "gender",    "smile",     "age",        "identity"};
}

std::string_view task_name(Task t)
{
    return kNames[static_cast<std::size_t>(t)];
}

std::optional<Task> task_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return static_cast<Task>(i);
    return std::nullopt;
}

bool is_subject_independent(Task t)
{
    switch (t) {
    case Task::Detection:
    case Task::Landmarks:
    case Task::Visibility:
    case Task::Pose:
    case Task::Smile:
        return true;
    default:
        return false;
    }
}

std::size_t TaskSet::size() const
{
    std::size_t n = 0;
    for (auto t : kAllTasks) n += contains(t) ? 1 : 0;
    return n;
}

std::vector<Task> TaskSet::list() const
{
    std::vector<Task> out;
    for (auto t : kAllTasks)
        if (contains(t)) out.push_back(t);
    return out;
}

std::string TaskSet::to_string() const
{
    std::string s;
    for (auto t : list()) {
        if (!s.empty()) s += ',';
        s += task_name(t);
    }
    return s;
}

}  // namespace a1o
