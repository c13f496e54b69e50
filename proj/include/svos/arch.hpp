#pragma once

#include <string>
#include <vector>

#include "svos/error.hpp"

namespace svos {
namespace net {

// One encoder stage: a 3x3 convolution (optionally strided) followed by
// `res_blocks` residual blocks at the stage's resolution.
struct ConvStage {
  int out_ch = 0;
  int stride = 1;
  int res_blocks = 0;
};

// Static shape description of the three networks. The visual encoder E maps
// an RGB frame to a unit-norm D-channel grid; the frame-mask encoder V maps
// an RGB+mask stack to a D'-channel grid at the same stride; the decoder D
// turns fused (2D') features plus encoder skips into full-resolution fg/bg
// logits.
struct ArchDescriptor {
  std::vector<ConvStage> e_stages;
  int e_dim = 128;  // D
  std::vector<ConvStage> v_stages;
  int v_dim = 512;  // D'
  int d_base = 64;
  std::vector<int> d_up_ch;  // fused channel widths, one per upsampling level

  int stride() const {
    int s = 1;
    for (const auto& st : e_stages) s *= st.stride;
    return s;
  }

  int v_stride() const {
    int s = 1;
    for (const auto& st : v_stages) s *= st.stride;
    return s;
  }

  void validate() const {
    if (e_stages.empty() || v_stages.empty()) throw validation_error("arch: empty stage list");
    if (e_dim < 1 || v_dim < 1 || d_base < 1) throw validation_error("arch: bad head dims");
    if (stride() != v_stride())
      throw validation_error("arch: E stride " + std::to_string(stride()) +
                             " != V stride " + std::to_string(v_stride()));
    int ups = 0;
    for (const auto& st : e_stages) ups += (st.stride == 2) ? 1 : 0;
    if (static_cast<int>(d_up_ch.size()) != ups)
      throw validation_error("arch: decoder needs one fuse width per upsampling level");
    for (const auto& st : e_stages)
      if (st.stride != 1 && st.stride != 2) throw validation_error("arch: stage stride must be 1 or 2");
    for (const auto& st : v_stages)
      if (st.stride != 1 && st.stride != 2) throw validation_error("arch: stage stride must be 1 or 2");
  }

  // Paper-scale shape: stride 8, D=128, D'=512.
  static ArchDescriptor defaults() {
    ArchDescriptor a;
    a.e_stages = {{32, 1, 0}, {48, 2, 0}, {64, 2, 1}, {96, 2, 2}};
    a.e_dim = 128;
    a.v_stages = {{24, 2, 0}, {32, 2, 0}, {48, 2, 1}};
    a.v_dim = 512;
    a.d_base = 64;
    a.d_up_ch = {32, 16, 8};
    return a;
  }

  // Small stack that trains from scratch on a CPU in minutes; stride 4.
  static ArchDescriptor desk_scale() {
    ArchDescriptor a;
    a.e_stages = {{16, 1, 0}, {24, 2, 0}, {48, 2, 2}};
    a.e_dim = 64;
    a.v_stages = {{8, 2, 0}, {16, 2, 1}};
    a.v_dim = 256;
    a.d_base = 32;
    a.d_up_ch = {12, 8};
    return a;
  }

  // Minimal shape for finite-difference tests.
  static ArchDescriptor tiny() {
    ArchDescriptor a;
    a.e_stages = {{4, 1, 0}, {6, 2, 0}, {8, 2, 1}};
    a.e_dim = 6;
    a.v_stages = {{4, 2, 0}, {6, 2, 1}};
    a.v_dim = 8;
    a.d_base = 8;
    a.d_up_ch = {6, 4};
    return a;
  }

  std::string to_text() const;
  static ArchDescriptor from_text(const std::string& text);
  bool operator==(const ArchDescriptor& o) const;
};

}  // namespace net
}  // namespace svos
