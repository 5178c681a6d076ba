// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/param_store.hpp"

namespace a1o {

void ParamStore::add(const std::string& path, Tensor value, TaskSet users)
{
    if (!values_.emplace(path, std::move(value)).second) throw ContractError("duplicate parameter path '" + path + "'");
    sharing_[path] = users;
}

const Tensor& ParamStore::at(const std::string& path) const
{
    auto it = values_.find(path);
    if (it == values_.end()) throw ContractError("unknown parameter '" + path + "'");
    return it->second;
}

Tensor& ParamStore::mutable_at(const std::string& path)
{
    auto it = values_.find(path);
    if (it == values_.end()) throw ContractError("unknown parameter '" + path + "'");
    return it->second;
}

void ParamStore::set_users(const std::string& path, TaskSet users)
{
    if (!contains(path)) throw ContractError("unknown parameter '" + path + "'");
    sharing_[path] = users;
}

TaskSet ParamStore::users(const std::string& path) const
{
    auto it = sharing_.find(path);
    return it == sharing_.end() ? TaskSet{} : it->second;
}

std::size_t ParamStore::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& [_, t] : values_) n += t.size();
    return n;
}

GradientMap ParamStore::complete(const GradientMap& partial) const
{
    GradientMap out;
    for (const auto& [path, value] : values_) {
        auto it = partial.find(path);
        out.emplace(path, it != partial.end() ? it->second : Tensor::zeros(value.shape()));
    }
    return out;
}

}  // namespace a1o
