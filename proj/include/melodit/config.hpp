#pragma once

#include "melodit/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace melodit {

// Flat key=value configuration with dotted sections. Unknown keys are
// rejected; the digest of the canonicalized text is embedded in checkpoints
// and reports so artifacts can be matched to the run that produced them.
class RunConfig {
public:
    static RunConfig defaults();
    static RunConfig from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& assignment);  // "key=value"

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    long get_long(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    std::string canonical_text() const;
    std::string digest() const;  // fnv1a64 of canonical_text, hex

    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace melodit
