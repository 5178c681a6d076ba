// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/sample.hpp"

#include <string>

namespace a1o {

void LabelSet::restrict_to(TaskSet role)
{
    present = present & role;
    if (!present.contains(Task::Detection)) box.reset();
    if (!present.contains(Task::Landmarks)) landmarks.clear();
    if (!present.contains(Task::Visibility)) visibility.clear();
    if (!present.contains(Task::Pose)) pose.reset();
    if (!present.contains(Task::Gender)) gender.reset();
    if (!present.contains(Task::Smile)) smile.reset();
    if (!present.contains(Task::Age)) {
        age.reset();
        age_sigma.reset();
    }
    if (!present.contains(Task::Identity)) identity.reset();
}

void LabelSet::validate() const
{
    auto check = [&](Task t, bool has) {
        if (present.contains(t) != has)
            throw ContractError("label '" + std::string(task_name(t)) + "' " +
                                (has ? "is set but not marked present" : "is marked present but missing"));
    };
    if (box && !present.contains(Task::Detection)) throw ContractError("box is set but detection is not marked present");
    if (box && !(box->w > 0.0 && box->h > 0.0)) throw ContractError("box must have positive area");
    check(Task::Landmarks, !landmarks.empty());
    check(Task::Visibility, !visibility.empty());
    check(Task::Pose, pose.has_value());
    check(Task::Gender, gender.has_value());
    check(Task::Smile, smile.has_value());
    check(Task::Age, age.has_value());
    check(Task::Identity, identity.has_value());
    if (landmarks.size() % 2 != 0) throw ContractError("landmarks need an even coordinate count");
    if (!landmarks.empty() && !visibility.empty() && visibility.size() * 2 != landmarks.size())
        throw ContractError("visibility count must equal landmark count");
    if (age_sigma && !(*age_sigma > 0.0)) throw ContractError("age sigma must be positive");
    for (auto v : {gender, smile})
        if (v && *v != 0 && *v != 1) throw ContractError("binary labels must be 0 or 1");
    if (identity && *identity < 0) throw ContractError("identity must be non-negative");
}

}  // namespace a1o
