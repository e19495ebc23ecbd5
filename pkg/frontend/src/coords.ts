/** Mapping from display (client) coordinates to source-image pixels. */

export interface DisplayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/**
 * Convert a click at client coordinates into integer image pixels.
 *
 * The UI shows images at native resolution, so the transform is normally
 * the identity up to the element offset; the general form keeps clicks
 * correct if the browser ever scales the element. Returns null when the
 * click falls outside the image.
 */
export function displayToImage(
  clientX: number,
  clientY: number,
  rect: DisplayRect,
  imageSize: number,
): { x: number; y: number } | null {
  if (rect.width <= 0 || rect.height <= 0) {
    return null;
  }
  const x = Math.floor(((clientX - rect.left) / rect.width) * imageSize);
  const y = Math.floor(((clientY - rect.top) / rect.height) * imageSize);
  if (x < 0 || y < 0 || x >= imageSize || y >= imageSize) {
    return null;
  }
  return { x, y };
}
