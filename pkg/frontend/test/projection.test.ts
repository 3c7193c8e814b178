import { describe, expect, it } from "vitest";

import {
  FACE_HEADINGS,
  clampLatitude,
  dragHeading,
  renderPerspective,
  samplePanorama,
  wrapAngle,
  type RgbaImage,
} from "../src/projection.js";

/** Panorama of six solid vertical bands keyed by longitude sextant. */
function bandPanorama(width = 96, height = 48): RgbaImage {
  const data = new Uint8ClampedArray(width * height * 4);
  for (let j = 0; j < height; j++) {
    for (let i = 0; i < width; i++) {
      const o = (j * width + i) * 4;
      const band = Math.floor((i / width) * 6);
      data[o] = band * 40;
      data[o + 1] = 255 - band * 40;
      data[o + 2] = 128;
      data[o + 3] = 255;
    }
  }
  return { width, height, data };
}

function solidPanorama(r: number, g: number, b: number, width = 32, height = 16): RgbaImage {
  const data = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = r;
    data[i * 4 + 1] = g;
    data[i * 4 + 2] = b;
    data[i * 4 + 3] = 255;
  }
  return { width, height, data };
}

describe("wrapAngle", () => {
  it("passes through in-range angles unchanged", () => {
    expect(wrapAngle(0.3)).toBe(0.3);
    expect(wrapAngle(-Math.PI)).toBe(-Math.PI);
  });

  it("wraps across the antimeridian", () => {
    expect(wrapAngle(Math.PI + 0.1)).toBeCloseTo(-Math.PI + 0.1, 12);
    expect(wrapAngle(-Math.PI - 0.1)).toBeCloseTo(Math.PI - 0.1, 12);
  });
});

describe("samplePanorama", () => {
  it("returns exact pixel values at pixel centres", () => {
    const img = bandPanorama();
    const [r] = samplePanorama(img, 0.5, 0.5);
    expect(r).toBe(0);
    const [r2] = samplePanorama(img, 90.5, 0.5); // band 5: 5 * 40
    expect(r2).toBe(200);
  });

  it("wraps around the seam", () => {
    const img = bandPanorama();
    // halfway between the last and first pixel: mixes bands 5 and 0
    const [r] = samplePanorama(img, 0.0, 8.0);
    expect(r).toBe((200 + 0) / 2);
  });
});

describe("renderPerspective", () => {
  it("is constant on a constant panorama", () => {
    const out = renderPerspective(solidPanorama(12, 200, 99), { phi: 0.7, theta: 0.2 },
      Math.PI / 2, 16, 16);
    for (let i = 0; i < 16 * 16; i++) {
      expect(out.data[i * 4]).toBe(12);
      expect(out.data[i * 4 + 1]).toBe(200);
      expect(out.data[i * 4 + 2]).toBe(99);
    }
  });

  it("centre pixel shows the heading direction content", () => {
    const img = bandPanorama(96, 48);
    // heading at the centre of band 4: lon = (4.5/6)*2pi - pi
    const phi = (4.5 / 6) * 2 * Math.PI - Math.PI;
    const out = renderPerspective(img, { phi, theta: 0 }, Math.PI / 2, 17, 17);
    const centre = (8 * 17 + 8) * 4;
    expect(out.data[centre]).toBe(160); // band 4
  });

  it("a 90-degree turn shows the adjacent cube face content", () => {
    const img = bandPanorama(96, 48);
    const front = renderPerspective(img, FACE_HEADINGS.front, Math.PI / 2, 9, 9);
    const right = renderPerspective(img, FACE_HEADINGS.right, Math.PI / 2, 9, 9);
    // face centres must show exactly what the panorama holds at their
    // longitudes (u = W/2 for front, u = 3W/4 for right)
    const [frontExpect] = samplePanorama(img, 48, 24);
    const [rightExpect] = samplePanorama(img, 72, 24);
    expect(front.data[(4 * 9 + 4) * 4]).toBe(frontExpect);
    expect(right.data[(4 * 9 + 4) * 4]).toBe(rightExpect);
    expect(frontExpect).not.toBe(rightExpect);
  });
});

describe("dragHeading", () => {
  it("dragging a full viewport width turns by the fov", () => {
    const h = dragHeading({ phi: 0, theta: 0 }, -320, 0, Math.PI / 2, 320);
    expect(h.phi).toBeCloseTo(Math.PI / 2, 12);
  });

  it("a 90-degree drag lands on the right-face heading", () => {
    const start = { phi: FACE_HEADINGS.front.phi, theta: 0 };
    const h = dragHeading(start, -320, 0, Math.PI / 2, 320);
    expect(h.phi).toBeCloseTo(FACE_HEADINGS.right.phi, 12);
    expect(h.theta).toBe(FACE_HEADINGS.right.theta);
  });

  it("clamps latitude at the poles", () => {
    const h = dragHeading({ phi: 0, theta: 1.5 }, 0, 10000, Math.PI / 2, 320);
    expect(h.theta).toBe(clampLatitude(h.theta));
    expect(h.theta).toBe(Math.PI / 2);
  });

  it("viewport changes are pure: inputs are not mutated", () => {
    const start = { phi: 0.1, theta: 0.2 };
    dragHeading(start, 50, 50, Math.PI / 2, 320);
    expect(start).toEqual({ phi: 0.1, theta: 0.2 });
  });
});
