// Image equivalence checks: file tree, environment, installed packages, WORKDIR.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dockorder {

/// (path, digest) pairs; the digest covers content and mode.
using FsListing = std::vector<std::pair<std::string, std::string>>;
using PackageSets = std::map<std::string, std::set<std::string>>;

class ImageInspector {
public:
    virtual ~ImageInspector() = default;
    virtual std::string name() const = 0;
    virtual FsListing walk_fs() = 0;
    virtual std::map<std::string, std::string> env() = 0;
    virtual PackageSets installed_packages() = 0;
    virtual std::string workdir() = 0;
};

/// Reads a directory laid out as
///   fs/            the image root
///   env.json       {"NAME": "value"} or ["NAME=value", ...]
///   packages.json  {"dpkg": ["name=version", ...], ...}
///   workdir        one line; "/" when absent
class FixtureInspector : public ImageInspector {
public:
    explicit FixtureInspector(std::string dir);
    std::string name() const override { return dir_; }
    FsListing walk_fs() override;
    std::map<std::string, std::string> env() override;
    PackageSets installed_packages() override;
    std::string workdir() override;

private:
    std::string dir_;
};

/// Shells out to the container CLI ($DOCKORDER_DOCKER or "docker").
class DockerInspector : public ImageInspector {
public:
    explicit DockerInspector(std::string image, std::string binary = "");
    std::string name() const override { return image_; }
    FsListing walk_fs() override;
    std::map<std::string, std::string> env() override;
    PackageSets installed_packages() override;
    std::string workdir() override;

private:
    std::string image_;
    std::string binary_;
};

/// Entries of a ustar/pax archive, digested like FixtureInspector does.
FsListing read_tar_listing(std::string_view archive);

const std::vector<std::string>& package_probe_order();
std::set<std::string> default_excludes();

enum class Verdict { Equivalent, SimilarWithDiffs, Divergent };
std::string_view to_string(Verdict v);

struct FsDiff {
    std::string path;
    std::optional<std::string> a;
    std::optional<std::string> b;
};

struct EnvDiff {
    std::string name;
    std::optional<std::string> a;
    std::optional<std::string> b;
};

struct PackageDiff {
    std::string manager;
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
};

struct ConsistencyReport {
    bool fs_equal = true;
    std::vector<FsDiff> fs_diffs;
    bool env_equal = true;
    std::vector<EnvDiff> env_diffs;
    bool pkg_equal = true;
    std::vector<PackageDiff> pkg_diffs;
    bool workdir_equal = true;
    std::string workdir_a, workdir_b;
    Verdict verdict = Verdict::Equivalent;
};

std::string normalize_workdir(std::string_view path);

ConsistencyReport compare_images(ImageInspector& a, ImageInspector& b,
                                 const std::set<std::string>& dynamic_env_excludes = default_excludes());

std::string consistency_to_json(const ConsistencyReport& report);

}  // namespace dockorder
