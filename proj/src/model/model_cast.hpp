#pragma once

// Scalar-type conversion for CCANModel (template member, header-only).

namespace ccan {

namespace detail {

template <typename U, typename T>
Tensor<U> cast_tensor(const Tensor<T>& t) {
  std::vector<U> values(t.data().begin(), t.data().end());
  return Tensor<U>(t.shape(), std::move(values), t.requires_grad());
}

template <typename U, typename T>
Linear<U> cast_linear(const Linear<T>& l) {
  return {cast_tensor<U>(l.weight), cast_tensor<U>(l.bias)};
}

template <typename U, typename T>
LayerNormParams<U> cast_norm(const LayerNormParams<T>& n) {
  if (!n.gamma.defined()) return {};
  return {cast_tensor<U>(n.gamma), cast_tensor<U>(n.beta)};
}

template <typename U, typename T>
BlockParams<U> cast_block(const BlockParams<T>& b) {
  BlockParams<U> out;
  out.kind = b.kind;
  out.norm_query = cast_norm<U>(b.norm_query);
  out.norm_context = cast_norm<U>(b.norm_context);
  out.norm_mlp = cast_norm<U>(b.norm_mlp);
  out.query = cast_linear<U>(b.query);
  out.key = cast_linear<U>(b.key);
  out.value = cast_linear<U>(b.value);
  out.output = cast_linear<U>(b.output);
  out.mlp_in = cast_linear<U>(b.mlp_in);
  out.mlp_out = cast_linear<U>(b.mlp_out);
  return out;
}

}  // namespace detail

template <typename T>
template <typename U>
CCANModel<U> CCANModel<T>::cast() const {
  CCANModel<U> out;
  out.config = config;
  out.input_projection = detail::cast_linear<U>(input_projection);
  for (const auto& s : stages) {
    StageParams<U> st;
    st.latents = detail::cast_tensor<U>(s.latents);
    st.class_token = detail::cast_tensor<U>(s.class_token);
    for (const auto& b : s.cross) st.cross.push_back(detail::cast_block<U>(b));
    for (const auto& b : s.self) st.self.push_back(detail::cast_block<U>(b));
    st.final_cross = detail::cast_block<U>(s.final_cross);
    st.final_self = detail::cast_block<U>(s.final_self);
    out.stages.push_back(std::move(st));
  }
  out.head = {detail::cast_norm<U>(head.norm), detail::cast_linear<U>(head.hidden), detail::cast_linear<U>(head.out)};
  return out;
}

}  // namespace ccan
