// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/task.hpp"
#include "a1o/tensor.hpp"

#include <map>
#include <string>

namespace a1o {

using GradientMap = std::map<std::string, Tensor>;

/// Named parameters plus the table of which task graphs read each one.
///
/// Sharing is recorded by path; a parameter exists once no matter how many
/// task heads consume it.
class ParamStore {
public:
    /// Adds a parameter; throws ContractError on a duplicate path.
    void add(const std::string& path, Tensor value, TaskSet users = {});

    bool contains(const std::string& path) const { return values_.count(path) != 0; }
    const Tensor& at(const std::string& path) const;
    Tensor& mutable_at(const std::string& path);
    const std::map<std::string, Tensor>& values() const { return values_; }

    void set_users(const std::string& path, TaskSet users);
    TaskSet users(const std::string& path) const;
    const std::map<std::string, TaskSet>& sharing() const { return sharing_; }

    std::size_t parameter_count() const;

    /// Gradient map covering every stored path; entries missing from
    /// `partial` become zeros.
    GradientMap complete(const GradientMap& partial) const;

    friend bool operator==(const ParamStore&, const ParamStore&) = default;

private:
    std::map<std::string, Tensor> values_;
    std::map<std::string, TaskSet> sharing_;
};

}  // namespace a1o
