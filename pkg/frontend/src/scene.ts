// Client-side rendering of SceneDescription JSON into SVG markup. The server
// sends only the shape list; no raster images cross the wire.

import type { SceneDescription, SceneElement } from "./types.js";

const CANVAS = 100;

function fmt(v: number): string {
  return Number(v.toFixed(3)).toString();
}

function polygonPoints(n: number, size: number, star = false): string {
  const spikes = star ? n * 2 : n;
  const pts: string[] = [];
  for (let i = 0; i < spikes; i++) {
    const r = !star || i % 2 === 0 ? size : size * 0.45;
    const ang = -Math.PI / 2 + (2 * Math.PI * i) / spikes;
    pts.push(`${fmt(r * Math.cos(ang))},${fmt(r * Math.sin(ang))}`);
  }
  return pts.join(" ");
}

function elementMarkup(shape: string, e: SceneElement, fill: string, stroke: string): string {
  const tr = `transform="translate(${fmt(e.x)} ${fmt(e.y)}) rotate(${fmt(e.rotation)})"`;
  const paint = `fill="${fill}" stroke="${stroke}" stroke-width="1.5"`;
  const s = e.size;
  switch (shape) {
    case "circle":
      return `<circle r="${fmt(s)}" ${paint} ${tr}/>`;
    case "ring":
      return `<circle r="${fmt(s)}" fill="none" stroke="${fill}" stroke-width="${fmt(s / 2.5)}" ${tr}/>`;
    case "square":
      return `<rect x="${fmt(-s)}" y="${fmt(-s)}" width="${fmt(2 * s)}" height="${fmt(2 * s)}" ${paint} ${tr}/>`;
    case "cross": {
      const w = s * 0.4;
      const a = fmt(s - w);
      return (
        `<path d="M ${fmt(-w)} ${fmt(-s)} h ${fmt(2 * w)} v ${a} h ${a} v ${fmt(2 * w)} ` +
        `h -${a} v ${a} h ${fmt(-2 * w)} v -${a} h -${a} v ${fmt(-2 * w)} h ${a} Z" ${paint} ${tr}/>`
      );
    }
    case "drop":
      return (
        `<path d="M 0 ${fmt(-s)} C ${fmt(s)} ${fmt(-s * 0.2)} ${fmt(s * 0.8)} ${fmt(s)} 0 ${fmt(s)} ` +
        `C ${fmt(-s * 0.8)} ${fmt(s)} ${fmt(-s)} ${fmt(-s * 0.2)} 0 ${fmt(-s)} Z" ${paint} ${tr}/>`
      );
    default: {
      const sides: Record<string, number> = {
        triangle: 3,
        diamond: 4,
        pentagon: 5,
        hexagon: 6,
        star: 5,
      };
      const n = sides[shape] ?? 6;
      return `<polygon points="${polygonPoints(n, s, shape === "star")}" ${paint} ${tr}/>`;
    }
  }
}

export function sceneToSvg(desc: SceneDescription): string {
  const body = desc.elements
    .map((e) => elementMarkup(desc.shape_kind, e, desc.fill, desc.stroke))
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${CANVAS} ${CANVAS}">` +
    `<rect width="${CANVAS}" height="${CANVAS}" fill="${desc.background}"/>` +
    body +
    `</svg>`
  );
}
