/**
 * Client-side equirectangular math: viewport reprojection and drag handling.
 *
 * Mirrors the server's conventions exactly: longitude phi in [-pi, pi) maps
 * to u = (W / 2pi) * (phi + pi), latitude theta in [-pi/2, pi/2] maps to
 * v = (H / pi) * (pi/2 - theta); pixel i has continuous coordinate i + 0.5;
 * u wraps around the seam, v clamps at the poles.
 */

export interface Heading {
  phi: number; // longitude, radians
  theta: number; // latitude, radians
}

export interface RgbaImage {
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA rows, top to bottom
}

export const TWO_PI = 2 * Math.PI;

export function wrapAngle(phi: number): number {
  if (phi >= -Math.PI && phi < Math.PI) return phi;
  return ((((phi + Math.PI) % TWO_PI) + TWO_PI) % TWO_PI) - Math.PI;
}

export function clampLatitude(theta: number): number {
  return Math.min(Math.PI / 2, Math.max(-Math.PI / 2, theta));
}

/** Bilinear lookup at continuous pixel coordinates; wrap in u, clamp in v. */
export function samplePanorama(img: RgbaImage, u: number, v: number): [number, number, number] {
  const w = img.width;
  const h = img.height;
  let x = u - 0.5;
  let y = v - 0.5;
  y = Math.min(h - 1, Math.max(0, y));
  const x0f = Math.floor(x);
  const y0 = Math.floor(y);
  const fx = x - x0f;
  const fy = y - y0;
  const x0 = ((x0f % w) + w) % w;
  const x1 = (x0 + 1) % w;
  const y1 = Math.min(y0 + 1, h - 1);
  const at = (yy: number, xx: number, c: number) => img.data[(yy * w + xx) * 4 + c];
  const out: [number, number, number] = [0, 0, 0];
  for (let c = 0; c < 3; c++) {
    out[c] =
      at(y0, x0, c) * (1 - fx) * (1 - fy) +
      at(y0, x1, c) * fx * (1 - fy) +
      at(y1, x0, c) * (1 - fx) * fy +
      at(y1, x1, c) * fx * fy;
  }
  return out;
}

/**
 * Gnomonic viewport of the panorama centred on the heading; fov is the
 * horizontal field of view in radians. Pure CPU fallback-free reprojection,
 * identical math to the server's perspective renderer.
 */
export function renderPerspective(
  img: RgbaImage,
  heading: Heading,
  fov: number,
  outW: number,
  outH: number,
): RgbaImage {
  const cp = Math.cos(heading.phi);
  const sp = Math.sin(heading.phi);
  const ct = Math.cos(heading.theta);
  const st = Math.sin(heading.theta);
  const axis = [ct * cp, st, ct * sp];
  const right = [-sp, 0, cp];
  const up = [-cp * st, ct, -sp * st];
  const half = Math.tan(fov / 2);
  const halfV = (half * outH) / outW;
  const out = new Uint8ClampedArray(outW * outH * 4);
  for (let j = 0; j < outH; j++) {
    const y = ((2 * (j + 0.5)) / outH - 1) * halfV;
    for (let i = 0; i < outW; i++) {
      const x = ((2 * (i + 0.5)) / outW - 1) * half;
      const d = [
        axis[0] + x * right[0] - y * up[0],
        axis[1] + x * right[1] - y * up[1],
        axis[2] + x * right[2] - y * up[2],
      ];
      const norm = Math.hypot(d[0], d[1], d[2]);
      const phi = Math.atan2(d[2], d[0]);
      const theta = Math.asin(d[1] / norm);
      const u = (img.width / TWO_PI) * (wrapAngle(phi) + Math.PI);
      const v = (img.height / Math.PI) * (Math.PI / 2 - theta);
      const [r, g, b] = samplePanorama(img, u, v);
      const o = (j * outW + i) * 4;
      out[o] = r;
      out[o + 1] = g;
      out[o + 2] = b;
      out[o + 3] = 255;
    }
  }
  return { width: outW, height: outH, data: out };
}

/**
 * Drag-to-look: convert a mouse delta in viewport pixels into a new heading.
 * Dragging the image right moves the view left (grab-and-pull), matching the
 * usual panorama viewer feel; vertical drags clamp at the poles.
 */
export function dragHeading(
  heading: Heading,
  dxPixels: number,
  dyPixels: number,
  fov: number,
  viewportWidth: number,
): Heading {
  const radPerPixel = fov / viewportWidth;
  return {
    phi: wrapAngle(heading.phi - dxPixels * radPerPixel),
    theta: clampLatitude(heading.theta + dyPixels * radPerPixel),
  };
}

/** Centre direction of each cube face, for the cube-net render mode. */
export const FACE_HEADINGS: Record<string, Heading> = {
  front: { phi: 0, theta: 0 },
  right: { phi: Math.PI / 2, theta: 0 },
  back: { phi: -Math.PI, theta: 0 },
  left: { phi: -Math.PI / 2, theta: 0 },
  top: { phi: 0, theta: Math.PI / 2 },
  bottom: { phi: 0, theta: -Math.PI / 2 },
};
