/**
 * Conv-training shims for the wasm backend.
 *
 * The backend ships no Conv2DBackpropFilter kernel at all, and its
 * Conv2DBackpropInput kernel is a naive loop an order of magnitude
 * slower than the XNNPACK-backed Conv2D. Both gradients of a stride-s,
 * dilation-1 NHWC convolution are themselves convolutions:
 *
 *   dW[u,v,ic,oc] = sum_{b,p,q} x[b, s*p+u-pt, s*q+v-pl, ic] dy[b,p,q,oc]
 *     -> pad x like the forward pass, convolve with dy as a filter
 *        dilated by s, transpose batch/channel axes back;
 *   dX (stride 1) = conv2d(dy, filter flipped spatially with in/out
 *        channels swapped, pad (k-1) - forward pad).
 *
 * So this module registers kernel implementations composed from Conv2D,
 * Transpose, Reverse, Pad, and Slice. Non-stride-1 input gradients fall
 * back to the stock kernel (slow but present); the composed kernels are
 * checked against finite differences in the test suite.
 */

import * as tf from "@tensorflow/tfjs";

type Pad = "same" | "valid" | number;
type Pair = [number, number];

let patched = false;

/** Forward padding (before, after) for one spatial axis. */
function forwardPadding(
  pad: Pad,
  inSize: number,
  outSize: number,
  kernel: number,
  stride: number,
): Pair {
  if (pad === "valid") return [0, 0];
  if (typeof pad === "number") return [pad, pad];
  const total = Math.max((outSize - 1) * stride + kernel - inSize, 0);
  const before = Math.floor(total / 2);
  return [before, total - before];
}

function filterGradViaConv(
  x: tf.Tensor4D,
  dy: tf.Tensor4D,
  filterShape: [number, number, number, number],
  pad: Pad,
  stride: Pair,
): tf.Tensor4D {
  return tf.tidy(() => {
    const [kh, kw] = filterShape;
    const ph = forwardPadding(pad, x.shape[1], dy.shape[1], kh, stride[0]);
    const pw = forwardPadding(pad, x.shape[2], dy.shape[2], kw, stride[1]);
    const padded =
      ph[0] || ph[1] || pw[0] || pw[1]
        ? (tf.pad(x, [[0, 0], ph, pw, [0, 0]]) as tf.Tensor4D)
        : x;
    const xT = tf.transpose(padded, [3, 1, 2, 0]); // [IC, Hp, Wp, B]
    const dyT = tf.transpose(dy, [1, 2, 0, 3]); // [HO, WO, B, OC]
    const grad = tf.conv2d(
      xT as tf.Tensor4D,
      dyT as unknown as tf.Tensor4D,
      1,
      "valid",
      "NHWC",
      stride, // dilation = forward stride
    ); // [IC, >=KH, >=KW, OC]
    const clipped =
      grad.shape[1] === kh && grad.shape[2] === kw
        ? grad
        : tf.slice(grad, [0, 0, 0, 0], [grad.shape[0], kh, kw, grad.shape[3]]);
    return tf.transpose(clipped, [1, 2, 0, 3]) as tf.Tensor4D;
  });
}

function inputGradViaConv(
  dy: tf.Tensor4D,
  filter: tf.Tensor4D,
  pad: Pad,
): tf.Tensor4D {
  return tf.tidy(() => {
    const k = filter.shape[0];
    const [pt] = forwardPadding(pad, dy.shape[1], dy.shape[1], k, 1);
    const flipped = tf.transpose(tf.reverse(filter, [0, 1]), [0, 1, 3, 2]);
    return tf.conv2d(dy, flipped as tf.Tensor4D, 1, k - 1 - pt) as tf.Tensor4D;
  });
}

function isStrideOne(strides: number | Pair): boolean {
  return strides === 1 || (Array.isArray(strides) && strides[0] === 1 && strides[1] === 1);
}

function asPair(strides: number | Pair): Pair {
  return Array.isArray(strides) ? strides : [strides, strides];
}

function supportedPad(pad: unknown): pad is Pad {
  return pad === "same" || pad === "valid" || typeof pad === "number";
}

export function patchConvKernelsForWasm(): void {
  if (patched) return;
  patched = true;
  const engine = tf.engine;
  const stockBackpropInput = tf.getKernel("Conv2DBackpropInput", "wasm");

  tf.registerKernel({
    kernelName: "Conv2DBackpropFilter",
    backendName: "wasm",
    kernelFunc: ({ inputs, attrs, backend }) => {
      const { x, dy } = inputs as { x: tf.TensorInfo; dy: tf.TensorInfo };
      const { strides, pad, dataFormat, filterShape } = attrs as unknown as {
        strides: number | Pair;
        pad: unknown;
        dataFormat: string;
        filterShape: [number, number, number, number];
      };
      if (dataFormat !== "NHWC" || !supportedPad(pad)) {
        throw new Error(
          `wasm Conv2DBackpropFilter shim supports NHWC with same/valid/numeric ` +
            `padding, got ${dataFormat}/${JSON.stringify(pad)}`,
        );
      }
      // wrappers decRef the shared data on dispose, so balance it up front
      // (same pattern the backend's own Reshape kernel uses)
      const wasmBackend = backend as unknown as { incRef(dataId: object): void };
      wasmBackend.incRef(x.dataId);
      wasmBackend.incRef(dy.dataId);
      const xT = engine().makeTensorFromTensorInfo(x) as tf.Tensor4D;
      const dyT = engine().makeTensorFromTensorInfo(dy) as tf.Tensor4D;
      const out = filterGradViaConv(xT, dyT, filterShape, pad, asPair(strides));
      xT.dispose();
      dyT.dispose();
      return out;
    },
  });

  // Replace the stock input gradient with the conv form where possible.
  tf.registerKernel({
    kernelName: "Conv2DBackpropInput",
    backendName: "wasm",
    kernelFunc: (args) => {
      const { dy, filter } = args.inputs as { dy: tf.TensorInfo; filter: tf.TensorInfo };
      const { strides, pad, dataFormat } = args.attrs as unknown as {
        strides: number | Pair;
        pad: unknown;
        dataFormat: string;
      };
      const oddKernel = filter.shape[0] % 2 === 1 && filter.shape[1] % 2 === 1;
      if (
        isStrideOne(strides) &&
        dataFormat === "NHWC" &&
        supportedPad(pad) &&
        oddKernel
      ) {
        const wasmBackend = args.backend as unknown as { incRef(dataId: object): void };
        wasmBackend.incRef(dy.dataId);
        wasmBackend.incRef(filter.dataId);
        const dyT = engine().makeTensorFromTensorInfo(dy) as tf.Tensor4D;
        const filterT = engine().makeTensorFromTensorInfo(filter) as tf.Tensor4D;
        const out = inputGradViaConv(dyT, filterT, pad);
        dyT.dispose();
        filterT.dispose();
        return out;
      }
      return stockBackpropInput!.kernelFunc(args);
    },
  });
}
